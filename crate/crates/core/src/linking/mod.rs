//! Schema linking: alignments between question n-grams and schema items
//! (name-based) or stored cell values (value-based).

mod normalize;
mod tokenize;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::schema::{ColumnId, DatabaseSchema};

pub use normalize::{infer_hint, normalize_text, normalize_value, ValueError};
pub use tokenize::{normalize_name, tokenize_question, Language};

pub const DEFAULT_MAX_NGRAM: usize = 5;

/// Words too generic to carry a partial match on their own.
const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "for", "to", "and", "or", "is", "are", "was",
    "were", "be", "by", "with", "what", "which", "who", "how", "many", "much", "all", "each",
    "that", "this", "there", "their", "from", "as", "do", "doe", "me", "show", "list", "give",
    "find", "return",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkError {
    #[error("turn {0} is empty after tokenization")]
    EmptyTurn(usize),
    #[error("a question needs at least one turn")]
    NoTurns,
}

/// Tokenized dialogue, oldest turn first and the current question last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTokens {
    turns: Vec<Vec<String>>,
    pub language: Language,
}

impl QuestionTokens {
    pub fn from_texts<S: AsRef<str>>(turns: &[S], language: Language) -> Result<Self, LinkError> {
        let tokenized =
            turns.iter().map(|t| tokenize_question(t.as_ref(), language)).collect::<Vec<_>>();
        Self::from_tokens(tokenized, language)
    }

    pub fn from_tokens(turns: Vec<Vec<String>>, language: Language) -> Result<Self, LinkError> {
        if turns.is_empty() {
            return Err(LinkError::NoTurns);
        }
        if let Some(i) = turns.iter().position(Vec::is_empty) {
            return Err(LinkError::EmptyTurn(i));
        }
        Ok(Self { turns, language })
    }

    pub fn turns(&self) -> &[Vec<String>] {
        &self.turns
    }

    /// The question being answered (most recent turn).
    pub fn current(&self) -> &[String] {
        self.turns.last().expect("at least one turn")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MatchKind {
    ExactMatch,
    PartialMatch,
    ValueMatch,
}

impl MatchKind {
    pub fn mark(self) -> &'static str {
        match self {
            Self::ExactMatch => "Exact-Match",
            Self::PartialMatch => "Partial-Match",
            Self::ValueMatch => "Value-Match",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LinkTarget {
    Table { table: usize },
    Column { column: ColumnId },
    Value { column: ColumnId, value: String },
}

impl LinkTarget {
    pub fn column(&self) -> Option<ColumnId> {
        match self {
            Self::Table { .. } => None,
            Self::Column { column } | Self::Value { column, .. } => Some(*column),
        }
    }

    pub fn describe(&self, schema: &DatabaseSchema) -> String {
        match self {
            Self::Table { table } => schema.table(*table).name.clone(),
            Self::Column { column } => schema.qualified_name(*column),
            Self::Value { column, value } => format!("{}={value}", schema.qualified_name(*column)),
        }
    }
}

/// Half-open token range `[start, end)` into the current question turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkAnnotation {
    pub span: Span,
    pub target: LinkTarget,
    pub kind: MatchKind,
}

/// Accepts candidates longest-first. A span inside an already accepted longer
/// span is dropped, and one target never receives two overlapping spans.
struct Acceptor {
    accepted: Vec<LinkAnnotation>,
    longer: Vec<Span>,
}

impl Acceptor {
    fn new() -> Self {
        Self { accepted: Vec::new(), longer: Vec::new() }
    }

    fn shadowed(&self, span: &Span) -> bool {
        self.longer.iter().any(|s| s.contains(span))
    }

    fn offer(&mut self, candidate: LinkAnnotation) {
        let clash = self
            .accepted
            .iter()
            .any(|a| a.target == candidate.target && a.span.overlaps(&candidate.span));
        if !clash {
            self.accepted.push(candidate);
        }
    }

    fn close_length(&mut self, n: usize) {
        self.longer = self.accepted.iter().filter(|a| a.span.len() >= n).map(|a| a.span).collect();
    }
}

fn is_strict_window(needle: &[String], hay: &[String]) -> bool {
    needle.len() < hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Name-based linking over the current turn.
pub fn name_link(
    question: &QuestionTokens,
    schema: &DatabaseSchema,
    max_ngram: usize,
) -> Vec<LinkAnnotation> {
    let tokens: Vec<Vec<String>> = question.current().iter().map(|t| normalize_name(t)).collect();
    let mut targets: Vec<(LinkTarget, Vec<String>)> = Vec::new();
    for (ti, t) in schema.tables().iter().enumerate() {
        targets.push((LinkTarget::Table { table: ti }, normalize_name(&t.name)));
    }
    for (id, c) in schema.columns() {
        targets.push((LinkTarget::Column { column: id }, normalize_name(&c.name)));
    }
    targets.retain(|(_, name)| !name.is_empty());

    let mut acc = Acceptor::new();
    let max_n = max_ngram.max(1).min(tokens.len());
    for n in (1..=max_n).rev() {
        for start in 0..=tokens.len() - n {
            let span = Span { start, end: start + n };
            if acc.shadowed(&span) {
                continue;
            }
            let gram: Vec<String> = tokens[start..start + n].iter().flatten().cloned().collect();
            if gram.is_empty() {
                continue;
            }
            let informative = gram.iter().any(|w| !STOPWORDS.contains(&w.as_str()));
            for (target, name) in &targets {
                let kind = if &gram == name {
                    MatchKind::ExactMatch
                } else if informative && is_strict_window(&gram, name) {
                    MatchKind::PartialMatch
                } else {
                    continue;
                };
                acc.offer(LinkAnnotation { span, target: target.clone(), kind });
            }
        }
        acc.close_length(n);
    }
    sorted(acc.accepted)
}

/// Value-based linking: question n-grams equal to a stored cell value after
/// normalization with the column's type as hint.
pub fn value_link(question: &QuestionTokens, schema: &DatabaseSchema) -> Vec<LinkAnnotation> {
    value_link_n(question, schema, DEFAULT_MAX_NGRAM)
}

pub fn value_link_n(
    question: &QuestionTokens,
    schema: &DatabaseSchema,
    max_ngram: usize,
) -> Vec<LinkAnnotation> {
    let mut index: Vec<(ColumnId, HashMap<String, String>)> = Vec::new();
    for (id, c) in schema.columns() {
        let Some(values) = &c.sample_values else { continue };
        let mut map = HashMap::new();
        for v in values {
            let norm = normalize_value(v, c.col_type).unwrap_or_else(|e| e.fallback().to_string());
            if !norm.is_empty() {
                map.entry(norm).or_insert_with(|| v.clone());
            }
        }
        if !map.is_empty() {
            index.push((id, map));
        }
    }
    if index.is_empty() {
        return Vec::new();
    }
    let tokens = question.current();
    let mut acc = Acceptor::new();
    let max_n = max_ngram.max(1).min(tokens.len());
    for n in (1..=max_n).rev() {
        for start in 0..=tokens.len() - n {
            let span = Span { start, end: start + n };
            if acc.shadowed(&span) {
                continue;
            }
            let gram = tokens[start..start + n].join(" ");
            for (id, values) in &index {
                let hint = schema.column(*id).col_type;
                let Ok(norm) = normalize_value(&gram, hint) else { continue };
                if let Some(original) = values.get(&norm) {
                    acc.offer(LinkAnnotation {
                        span,
                        target: LinkTarget::Value { column: *id, value: original.clone() },
                        kind: MatchKind::ValueMatch,
                    });
                }
            }
        }
        acc.close_length(n);
    }
    sorted(acc.accepted)
}

/// Name links followed by value links.
pub fn link_all(question: &QuestionTokens, schema: &DatabaseSchema, max_ngram: usize) -> Vec<LinkAnnotation> {
    let mut links = name_link(question, schema, max_ngram);
    links.extend(value_link_n(question, schema, max_ngram));
    links
}

fn sorted(mut v: Vec<LinkAnnotation>) -> Vec<LinkAnnotation> {
    v.sort_by(|a, b| (a.span.start, a.span.end, &a.target).cmp(&(b.span.start, b.span.end, &b.target)));
    v
}
