use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use super::DecodeError;
use crate::schema::DatabaseSchema;

pub type TokenId = u32;

pub const EOS: &str = "</s>";
pub const QUOTE: &str = "'";

/// Tokens that may appear outside identifier runs and literals.
pub const SQL_KEYWORDS: &[&str] = &[
    "SELECT", "DISTINCT", "FROM", "JOIN", "ON", "AS", "WHERE", "GROUP", "BY", "HAVING", "ORDER",
    "ASC", "DESC", "LIMIT", "AND", "OR", "NOT", "IN", "LIKE", "BETWEEN", "UNION", "INTERSECT",
    "EXCEPT", "COUNT", "SUM", "AVG", "MIN", "MAX", ",", "(", ")", "=", "!=", "<", ">", "<=",
    ">=",
];

const AGGREGATES: &[&str] = &["COUNT", "SUM", "AVG", "MIN", "MAX"];

const SYMBOLS: &[char] = &['(', ')', ',', '.', '*', '=', '<', '>', '!', ';'];

/// Splits SQL text into the word-level surface tokens the decoder emits.
///
/// Identifiers are split at `.`, punctuation and operators stand alone, and
/// a quoted literal becomes `'`, its whitespace-separated words, `'`.
pub fn sql_surface_tokens(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' || c == '"' {
            out.push(QUOTE.to_string());
            let mut content = String::new();
            i += 1;
            while i < chars.len() {
                if chars[i] == c {
                    if chars.get(i + 1) == Some(&c) {
                        content.push(c);
                        i += 2;
                        continue;
                    }
                    break;
                }
                content.push(chars[i]);
                i += 1;
            }
            i += 1;
            out.extend(content.split_whitespace().map(str::to_string));
            out.push(QUOTE.to_string());
        } else if SYMBOLS.contains(&c) {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            if matches!(two.as_str(), "<=" | ">=" | "!=" | "<>") {
                out.push(if two == "<>" { "!=".to_string() } else { two });
                i += 2;
            } else {
                if c != ';' {
                    out.push(c.to_string());
                }
                i += 1;
            }
        } else {
            let start = i;
            let numeric = c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
            while i < chars.len() {
                let d = chars[i];
                if d.is_whitespace() || d == '\'' || d == '"' {
                    break;
                }
                if d == '.' {
                    let so_far: String = chars[start..i].iter().collect();
                    let is_num = numeric && so_far.trim_start_matches('-').chars().all(|x| x.is_ascii_digit());
                    if !(is_num && chars.get(i + 1).is_some_and(|x| x.is_ascii_digit())) {
                        break;
                    }
                } else if SYMBOLS.contains(&d) {
                    break;
                }
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        }
    }
    out
}

/// Inverse of [`sql_surface_tokens`] on canonically rendered SQL.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut in_literal = false;
    let mut literal_words = 0usize;
    let mut prev: Option<&str> = None;
    for t in tokens {
        let t = t.as_ref();
        if in_literal {
            if t == QUOTE {
                out.push('\'');
                in_literal = false;
            } else {
                if literal_words > 0 {
                    out.push(' ');
                }
                out.push_str(&t.replace('\'', "''"));
                literal_words += 1;
            }
            prev = Some(t);
            continue;
        }
        let glue = match prev {
            None => true,
            Some(p) => {
                matches!(t, "." | "," | ")")
                    || matches!(p, "." | "(")
                    || (t == "(" && AGGREGATES.contains(&p))
            }
        };
        if !glue {
            out.push(' ');
        }
        if t == QUOTE {
            out.push('\'');
            in_literal = true;
            literal_words = 0;
        } else {
            out.push_str(t);
        }
        prev = Some(t);
    }
    out
}

fn is_number(t: &str) -> bool {
    let body = t.strip_prefix('-').unwrap_or(t);
    !body.is_empty()
        && body.chars().next().is_some_and(|c| c.is_ascii_digit())
        && body.chars().all(|c| c.is_ascii_digit() || c == '.')
        && body.matches('.').count() <= 1
        && !body.ends_with('.')
}

/// Word-level scorer vocabulary.
///
/// Ids 0 and 1 are always `</s>` and `'`; SQL keywords, `.` and `*` follow,
/// then everything added later in insertion order.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    keywords: HashSet<TokenId>,
    numbers: HashSet<TokenId>,
    tag: String,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
            keywords: HashSet::new(),
            numbers: HashSet::new(),
            tag: "sqlmark-word-v1".to_string(),
        };
        v.add(EOS);
        v.add(QUOTE);
        for kw in SQL_KEYWORDS {
            let id = v.add(kw);
            v.keywords.insert(id);
        }
        v.add(".");
        v.add("*");
        v
    }

    /// Adds every piece of every table and qualified column name.
    pub fn add_schema(&mut self, schema: &DatabaseSchema) {
        for t in schema.tables() {
            self.add_text(&t.name);
        }
        for (id, col) in schema.columns() {
            self.add_text(&schema.qualified_name(id));
            for v in col.sample_values.iter().flatten() {
                self.add_literal(v);
            }
        }
    }

    pub fn add_text(&mut self, sql: &str) {
        for t in sql_surface_tokens(sql) {
            self.add(&t);
        }
    }

    fn add_literal(&mut self, value: &str) {
        for w in value.split_whitespace() {
            self.add(w);
        }
    }

    pub fn add(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        if is_number(token) {
            self.numbers.insert(id);
        }
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn eos(&self) -> TokenId {
        0
    }

    pub fn quote(&self) -> TokenId {
        1
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn keywords(&self) -> &HashSet<TokenId> {
        &self.keywords
    }

    pub fn numbers(&self) -> &HashSet<TokenId> {
        &self.numbers
    }

    pub fn is_keyword(&self, id: TokenId) -> bool {
        self.keywords.contains(&id)
    }

    pub fn is_number(&self, id: TokenId) -> bool {
        self.numbers.contains(&id)
    }

    pub fn encode(&self, sql: &str) -> Result<Vec<TokenId>, DecodeError> {
        self.encode_tokens(&sql_surface_tokens(sql))
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<TokenId>, DecodeError> {
        tokens
            .iter()
            .map(|t| self.id(t.as_ref()).ok_or_else(|| DecodeError::Untokenizable(t.as_ref().to_string())))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        let toks: Vec<&str> = ids.iter().filter(|&&i| i != self.eos()).map(|&i| self.token(i)).collect();
        detokenize(&toks)
    }

    /// One token per line, line number = id.
    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DecodeError> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| DecodeError::Vocabulary(format!("{}: {e}", path.as_ref().display())))?;
        let v = Self::from_lines(text.lines())?;
        Ok(v)
    }

    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self, DecodeError> {
        let fresh = Self::new();
        let lines: Vec<&str> = lines.into_iter().collect();
        if lines.len() < fresh.len() || lines[..fresh.len()] != fresh.tokens.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            return Err(DecodeError::Vocabulary("reserved prefix does not match".into()));
        }
        let mut v = fresh;
        for l in &lines[v.len()..] {
            if v.index.contains_key(*l) {
                return Err(DecodeError::Vocabulary(format!("duplicate token `{l}`")));
            }
            v.add(l);
        }
        Ok(v)
    }
}
