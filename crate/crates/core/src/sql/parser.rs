use super::ast::*;
use super::SqlError;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    /// Backtick-quoted identifier; never a keyword.
    Quoted(String),
    Number(String),
    Str(String),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Lexeme {
    tok: Tok,
    pos: usize,
}

const SYMBOLS: &[&str] = &["<=", ">=", "!=", "<>", "(", ")", ",", ".", "*", "=", "<", ">", ";"];

const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "LIMIT", "JOIN", "INNER", "ON",
    "AS", "AND", "OR", "NOT", "IN", "LIKE", "BETWEEN", "UNION", "INTERSECT", "EXCEPT", "DISTINCT",
    "ASC", "DESC", "LEFT", "RIGHT", "OUTER", "FULL", "CROSS", "ALL", "OFFSET",
];

fn lex(text: &str) -> Result<Vec<Lexeme>, SqlError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out: Vec<Lexeme> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\'' || c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                let Some(&(_, d)) = chars.get(i) else {
                    return Err(SqlError::syntax(pos, "unterminated string literal"));
                };
                i += 1;
                if d == c {
                    if chars.get(i).map(|&(_, e)| e) == Some(c) {
                        s.push(c);
                        i += 1;
                        continue;
                    }
                    break;
                }
                s.push(d);
            }
            out.push(Lexeme { tok: Tok::Str(s), pos });
            continue;
        }
        if c == '`' {
            let mut s = String::new();
            i += 1;
            loop {
                let Some(&(_, d)) = chars.get(i) else {
                    return Err(SqlError::syntax(pos, "unterminated quoted identifier"));
                };
                i += 1;
                if d == '`' {
                    break;
                }
                s.push(d);
            }
            out.push(Lexeme { tok: Tok::Quoted(s), pos });
            continue;
        }
        let value_before = matches!(
            out.last().map(|l| &l.tok),
            Some(Tok::Word(_) | Tok::Quoted(_) | Tok::Number(_) | Tok::Str(_) | Tok::Sym(")" | "*"))
        ) && !matches!(out.last().map(|l| &l.tok), Some(Tok::Word(w)) if is_reserved(w));
        let negative = c == '-'
            && !value_before
            && chars.get(i + 1).is_some_and(|&(_, d)| d.is_ascii_digit() || d == '.');
        if c.is_ascii_digit() || negative || (c == '.' && chars.get(i + 1).is_some_and(|&(_, d)| d.is_ascii_digit()) && !value_before) {
            let mut s = String::new();
            if negative {
                s.push('-');
                i += 1;
            }
            let mut seen_dot = false;
            while let Some(&(_, d)) = chars.get(i) {
                if d.is_ascii_digit() {
                    s.push(d);
                } else if d == '.' && !seen_dot && chars.get(i + 1).is_some_and(|&(_, e)| e.is_ascii_digit()) {
                    seen_dot = true;
                    s.push(d);
                } else {
                    break;
                }
                i += 1;
            }
            if chars.get(i).is_some_and(|&(_, d)| d.is_alphabetic() || d == '_') {
                return Err(SqlError::syntax(pos, "malformed number"));
            }
            out.push(Lexeme { tok: Tok::Number(s), pos });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, d)) = chars.get(i) {
                if d.is_alphanumeric() || d == '_' {
                    s.push(d);
                    i += 1;
                } else {
                    break;
                }
            }
            out.push(Lexeme { tok: Tok::Word(s), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().map(|&(_, d)| d).collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                out.push(Lexeme { tok: Tok::Sym(sym), pos });
                i += sym.chars().count();
            }
            None => return Err(SqlError::syntax(pos, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

fn is_reserved(w: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(w))
}

struct Parser {
    toks: Vec<Lexeme>,
    at: usize,
    end_pos: usize,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end_pos, |l| l.pos)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|l| &l.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.at + k).map(|l| &l.tok)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::syntax(self.pos(), msg))
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected {kw}"))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) if !is_reserved(&w) => {
                self.at += 1;
                Ok(w)
            }
            Some(Tok::Quoted(w)) => {
                self.at += 1;
                Ok(w)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn query(&mut self) -> Result<SqlQuery, SqlError> {
        self.expect_kw("SELECT")?;
        let distinct = self.eat_kw("DISTINCT");
        let mut items = vec![self.unit()?];
        while self.eat_sym(",") {
            items.push(self.unit()?);
        }
        self.expect_kw("FROM")?;
        let from = self.table_list()?;
        let where_clause = if self.eat_kw("WHERE") { Some(self.condition()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group_by.push(self.column()?);
            while self.eat_sym(",") {
                group_by.push(self.column()?);
            }
        }
        let having = if self.eat_kw("HAVING") { Some(self.condition()?) } else { None };
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                let unit = self.unit()?;
                let direction = if self.eat_kw("DESC") {
                    Direction::Desc
                } else {
                    self.eat_kw("ASC");
                    Direction::Asc
                };
                order_by.push(OrderItem { unit, direction });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_kw("LIMIT") {
            match self.peek().cloned() {
                Some(Tok::Number(n)) => {
                    let v = n.parse::<u64>().or_else(|_| self.err("LIMIT needs a non-negative integer"))?;
                    self.at += 1;
                    Some(v)
                }
                _ => return self.err("LIMIT needs a number"),
            }
        } else {
            None
        };
        let set_op = [SetOp::Union, SetOp::Intersect, SetOp::Except]
            .into_iter()
            .find(|op| self.is_kw(op.keyword()));
        let set_op = match set_op {
            Some(op) => {
                self.at += 1;
                if self.is_kw("ALL") {
                    return self.err("set operator modifiers are not supported");
                }
                Some((op, Box::new(self.query()?)))
            }
            None => None,
        };
        Ok(SqlQuery {
            select: Select { distinct, items },
            from,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
            set_op,
        })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        if self.is_sym("(") {
            return self.err("subqueries in FROM are not supported");
        }
        let name = self.ident()?;
        let alias = if self.eat_kw("AS") || matches!(self.peek(), Some(Tok::Word(w)) if !is_reserved(w)) {
            Some(self.ident()?)
        } else {
            None
        };
        Ok(TableRef { name, alias, on: Vec::new() })
    }

    fn table_list(&mut self) -> Result<FromClause, SqlError> {
        let mut tables = vec![self.table_ref()?];
        loop {
            if self.eat_sym(",") {
                tables.push(self.table_ref()?);
                continue;
            }
            for kw in ["LEFT", "RIGHT", "OUTER", "FULL", "CROSS"] {
                if self.is_kw(kw) {
                    return self.err(format!("{kw} joins are not supported"));
                }
            }
            let inner = self.eat_kw("INNER");
            if self.eat_kw("JOIN") {
                let mut t = self.table_ref()?;
                if self.eat_kw("ON") {
                    loop {
                        let left = self.column()?;
                        self.expect_sym("=")?;
                        let right = self.column()?;
                        t.on.push(JoinCondition { left, right });
                        // an AND after a join condition continues the ON list
                        // only when a column equality follows
                        if self.is_kw("AND") && self.looks_like_join_condition(1) {
                            self.at += 1;
                            continue;
                        }
                        break;
                    }
                }
                tables.push(t);
                continue;
            }
            if inner {
                return self.err("expected JOIN");
            }
            break;
        }
        Ok(FromClause { tables })
    }

    /// Column `=` column starting `k` tokens ahead.
    fn looks_like_join_condition(&self, k: usize) -> bool {
        let ident = |t: Option<&Tok>| matches!(t, Some(Tok::Word(w)) if !is_reserved(w)) || matches!(t, Some(Tok::Quoted(_)));
        let mut j = k;
        if !ident(self.peek_at(j)) {
            return false;
        }
        j += 1;
        if matches!(self.peek_at(j), Some(Tok::Sym("."))) {
            j += 2;
        }
        if !matches!(self.peek_at(j), Some(Tok::Sym("="))) {
            return false;
        }
        j += 1;
        if !ident(self.peek_at(j)) {
            return false;
        }
        // a bare identifier followed by `(` is a function call, not a column
        !matches!(self.peek_at(j + 1), Some(Tok::Sym("(")))
    }

    fn column(&mut self) -> Result<ColumnRef, SqlError> {
        if self.eat_sym("*") {
            return Ok(ColumnRef::star());
        }
        let first = self.ident()?;
        if self.eat_sym(".") {
            if self.eat_sym("*") {
                return Ok(ColumnRef { table: Some(first), column: "*".into() });
            }
            let col = self.ident()?;
            return Ok(ColumnRef { table: Some(first), column: col });
        }
        Ok(ColumnRef { table: None, column: first })
    }

    fn unit(&mut self) -> Result<ValueUnit, SqlError> {
        if let Some(Tok::Word(w)) = self.peek() {
            if let Some(agg) = Aggregate::from_keyword(w) {
                if matches!(self.peek_at(1), Some(Tok::Sym("("))) {
                    self.at += 2;
                    let distinct = self.eat_kw("DISTINCT");
                    let column = self.column()?;
                    self.expect_sym(")")?;
                    return Ok(ValueUnit { agg, distinct, column });
                }
            }
        }
        Ok(ValueUnit::column(self.column()?))
    }

    fn condition(&mut self) -> Result<Condition, SqlError> {
        let mut parts = vec![self.conjunction()?];
        while self.eat_kw("OR") {
            parts.push(self.conjunction()?);
        }
        Ok(Condition::or(parts).expect("non-empty"))
    }

    fn conjunction(&mut self) -> Result<Condition, SqlError> {
        let mut parts = vec![self.atom()?];
        while self.eat_kw("AND") {
            parts.push(self.atom()?);
        }
        Ok(Condition::and(parts).expect("non-empty"))
    }

    fn atom(&mut self) -> Result<Condition, SqlError> {
        if self.eat_sym("(") {
            let c = self.condition()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        let left = self.unit()?;
        let op = if self.eat_kw("NOT") {
            if self.eat_kw("IN") {
                CmpOp::NotIn
            } else if self.eat_kw("LIKE") {
                CmpOp::NotLike
            } else {
                return self.err("expected IN or LIKE after NOT");
            }
        } else if self.eat_kw("IN") {
            CmpOp::In
        } else if self.eat_kw("LIKE") {
            CmpOp::Like
        } else if self.eat_kw("BETWEEN") {
            CmpOp::Between
        } else {
            let op = match self.peek() {
                Some(Tok::Sym("=")) => CmpOp::Eq,
                Some(Tok::Sym("!=" | "<>")) => CmpOp::Ne,
                Some(Tok::Sym("<")) => CmpOp::Lt,
                Some(Tok::Sym(">")) => CmpOp::Gt,
                Some(Tok::Sym("<=")) => CmpOp::Le,
                Some(Tok::Sym(">=")) => CmpOp::Ge,
                _ => return self.err("expected comparison operator"),
            };
            self.at += 1;
            op
        };
        let right = match op {
            CmpOp::Between => {
                let lo = self.literal()?;
                self.expect_kw("AND")?;
                let hi = self.literal()?;
                Operand::Range(lo, hi)
            }
            CmpOp::In | CmpOp::NotIn => {
                self.expect_sym("(")?;
                if !self.is_kw("SELECT") {
                    return self.err("IN needs a subquery");
                }
                let q = self.query()?;
                self.expect_sym(")")?;
                Operand::Subquery(Box::new(q))
            }
            _ => self.operand()?,
        };
        Ok(Condition::Predicate(Predicate { left, op, right }))
    }

    fn literal(&mut self) -> Result<Literal, SqlError> {
        match self.peek().cloned() {
            Some(Tok::Number(n)) => {
                self.at += 1;
                Ok(Literal::Number(n))
            }
            Some(Tok::Str(s)) => {
                self.at += 1;
                Ok(Literal::Str(s))
            }
            _ => self.err("expected literal"),
        }
    }

    fn operand(&mut self) -> Result<Operand, SqlError> {
        match self.peek() {
            Some(Tok::Number(_) | Tok::Str(_)) => Ok(Operand::Literal(self.literal()?)),
            Some(Tok::Sym("(")) => {
                self.at += 1;
                if !self.is_kw("SELECT") {
                    return self.err("expected subquery");
                }
                let q = self.query()?;
                self.expect_sym(")")?;
                Ok(Operand::Subquery(Box::new(q)))
            }
            _ => Ok(Operand::Column(self.column()?)),
        }
    }
}

/// Parses without schema resolution.
pub fn parse_unresolved(text: &str) -> Result<SqlQuery, SqlError> {
    if text.trim().is_empty() {
        return Err(SqlError::syntax(0, "empty query"));
    }
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, end_pos: text.len() };
    let q = p.query()?;
    p.eat_sym(";");
    if p.at != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(q)
}
