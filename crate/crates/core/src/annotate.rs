//! Structure-marked input serialization.
//!
//! Layout of a full input:
//!
//! ```text
//! <current turn> | <previous turn> | ... <previous SQL>
//! [TABLE] <marks> T1 ... [COLUMN] <marks> T1.c1 [& value ...] ...
//! T1 links to T2 ...
//! ```
//!
//! Column marks are joined with `&` in the fixed order match kind(s),
//! `Primary-Key`, type. Each token carries a [`Segment`] label so the regions
//! can be recovered from the flat sequence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::linking::{LinkAnnotation, LinkTarget, MatchKind, QuestionTokens};
use crate::schema::{ColumnId, DatabaseSchema, SchemaGraph};
use crate::sql::{render_sql, SqlQuery};

/// The closed set of structure-mark tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mark {
    Table,
    Column,
    ExactMatch,
    PartialMatch,
    ValueMatch,
    PrimaryKey,
    Integer,
    Real,
    Text,
    Date,
    Boolean,
    Other,
    Amp,
    LinksTo,
    TurnSeparator,
}

impl Mark {
    pub const ALL: [Mark; 15] = [
        Mark::Table,
        Mark::Column,
        Mark::ExactMatch,
        Mark::PartialMatch,
        Mark::ValueMatch,
        Mark::PrimaryKey,
        Mark::Integer,
        Mark::Real,
        Mark::Text,
        Mark::Date,
        Mark::Boolean,
        Mark::Other,
        Mark::Amp,
        Mark::LinksTo,
        Mark::TurnSeparator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Table => "[TABLE]",
            Mark::Column => "[COLUMN]",
            Mark::ExactMatch => "Exact-Match",
            Mark::PartialMatch => "Partial-Match",
            Mark::ValueMatch => "Value-Match",
            Mark::PrimaryKey => "Primary-Key",
            Mark::Integer => "Integer",
            Mark::Real => "Real",
            Mark::Text => "Text",
            Mark::Date => "Date",
            Mark::Boolean => "Boolean",
            Mark::Other => "Other",
            Mark::Amp => "&",
            Mark::LinksTo => "links to",
            Mark::TurnSeparator => "|",
        }
    }

    pub fn parse(s: &str) -> Option<Mark> {
        Mark::ALL.into_iter().find(|m| m.as_str() == s)
    }

    fn of_kind(kind: MatchKind) -> Mark {
        match kind {
            MatchKind::ExactMatch => Mark::ExactMatch,
            MatchKind::PartialMatch => Mark::PartialMatch,
            MatchKind::ValueMatch => Mark::ValueMatch,
        }
    }

    fn of_type(ty: crate::schema::ColumnType) -> Mark {
        use crate::schema::ColumnType as T;
        match ty {
            T::Integer => Mark::Integer,
            T::Real => Mark::Real,
            T::Text => Mark::Text,
            T::Date => Mark::Date,
            T::Boolean => Mark::Boolean,
            T::Other => Mark::Other,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    /// 0 is the current question, 1 the turn before it, and so on.
    QuestionTurn(usize),
    TableRegion,
    ColumnRegion,
    RelationRegion,
    PrevSqlRegion,
    Mark,
}

/// Independently switchable mark families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkToggles {
    /// Match kinds, primary keys and column types as prefixes.
    pub schema_property: bool,
    /// `T1 links to T2` relation statements.
    pub database_structure: bool,
    /// The previous turn's SQL.
    pub discourse: bool,
}

impl Default for MarkToggles {
    fn default() -> Self {
        Self { schema_property: true, database_structure: true, discourse: true }
    }
}

impl MarkToggles {
    pub fn vanilla() -> Self {
        Self { schema_property: false, database_structure: false, discourse: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotateError {
    #[error("link target {0} is not in the schema")]
    UnknownLinkTarget(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedInput {
    tokens: Vec<String>,
    segments: Vec<Segment>,
}

impl AnnotatedInput {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, token: impl Into<String>, segment: Segment) {
        self.tokens.push(token.into());
        self.segments.push(segment);
    }

    fn mark(&mut self, m: Mark) {
        self.push(m.as_str(), Segment::Mark);
    }

    pub fn extend(&mut self, other: AnnotatedInput) {
        self.tokens.extend(other.tokens);
        self.segments.extend(other.segments);
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces.
    pub fn render(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn region(&self, segment: Segment) -> Vec<&str> {
        self.tokens
            .iter()
            .zip(&self.segments)
            .filter(|(_, s)| **s == segment)
            .map(|(t, _)| t.as_str())
            .collect()
    }

    /// Question turns oldest first, as they were given to [`build_input`].
    pub fn question_turns(&self) -> Vec<Vec<&str>> {
        let n = self
            .segments
            .iter()
            .filter_map(|s| match s {
                Segment::QuestionTurn(i) => Some(*i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        (0..n).rev().map(|i| self.region(Segment::QuestionTurn(i))).collect()
    }

    /// The input with every mark token and every region other than the
    /// question and schema items removed.
    pub fn strip_marks(&self) -> AnnotatedInput {
        let mut out = AnnotatedInput::new();
        for (i, (t, s)) in self.tokens.iter().zip(&self.segments).enumerate() {
            match s {
                Segment::QuestionTurn(0) => out.push(t.clone(), *s),
                Segment::TableRegion | Segment::ColumnRegion => {
                    // values sit behind `&` after their column
                    let is_value = i > 0 && self.tokens[i - 1] == "&" && *s == Segment::ColumnRegion
                        && self.segments[i - 1] == Segment::Mark
                        && i >= 2 && self.segments[i - 2] == Segment::ColumnRegion;
                    if !is_value {
                        out.push(t.clone(), *s);
                    }
                }
                Segment::Mark if t == "[TABLE]" || t == "[COLUMN]" => out.push(t.clone(), *s),
                _ => {}
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotateOptions {
    pub toggles: MarkToggles,
    /// Attach value-linked cell values behind their column.
    pub include_values: bool,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        Self { toggles: MarkToggles::default(), include_values: true }
    }
}

#[derive(Default)]
struct ItemMarks {
    kinds: BTreeSet<MatchKind>,
    values: Vec<String>,
}

fn collect_marks(
    schema: &DatabaseSchema,
    links: &[LinkAnnotation],
) -> Result<(BTreeMap<usize, ItemMarks>, BTreeMap<ColumnId, ItemMarks>), AnnotateError> {
    let mut tables: BTreeMap<usize, ItemMarks> = BTreeMap::new();
    let mut columns: BTreeMap<ColumnId, ItemMarks> = BTreeMap::new();
    for link in links {
        match &link.target {
            LinkTarget::Table { table } => {
                if *table >= schema.tables().len() {
                    return Err(AnnotateError::UnknownLinkTarget(format!("table #{table}")));
                }
                tables.entry(*table).or_default().kinds.insert(link.kind);
            }
            LinkTarget::Column { column } | LinkTarget::Value { column, .. } => {
                if !schema.contains_column(*column) {
                    return Err(AnnotateError::UnknownLinkTarget(format!("column {column:?}")));
                }
                let entry = columns.entry(*column).or_default();
                entry.kinds.insert(link.kind);
                if let LinkTarget::Value { value, .. } = &link.target {
                    if !entry.values.contains(value) {
                        entry.values.push(value.clone());
                    }
                }
            }
        }
    }
    Ok((tables, columns))
}

/// `[TABLE] <tables> [COLUMN] <columns>` with every column prefixed by its
/// marks.
pub fn linearize_schema(
    schema: &DatabaseSchema,
    links: &[LinkAnnotation],
    include_values: bool,
) -> Result<AnnotatedInput, AnnotateError> {
    linearize(schema, links, include_values, true)
}

fn linearize(
    schema: &DatabaseSchema,
    links: &[LinkAnnotation],
    include_values: bool,
    with_marks: bool,
) -> Result<AnnotatedInput, AnnotateError> {
    let (table_marks, column_marks) = collect_marks(schema, links)?;
    let mut out = AnnotatedInput::new();
    out.mark(Mark::Table);
    for (ti, table) in schema.tables().iter().enumerate() {
        if with_marks {
            if let Some(m) = table_marks.get(&ti) {
                push_prefix(&mut out, m.kinds.iter().map(|k| Mark::of_kind(*k)).collect());
            }
        }
        out.push(table.name.clone(), Segment::TableRegion);
    }
    out.mark(Mark::Column);
    for (id, col) in schema.columns() {
        let marks = column_marks.get(&id);
        if with_marks {
            let mut prefix: Vec<Mark> = marks
                .map(|m| m.kinds.iter().map(|k| Mark::of_kind(*k)).collect())
                .unwrap_or_default();
            if col.is_primary {
                prefix.push(Mark::PrimaryKey);
            }
            prefix.push(Mark::of_type(col.col_type));
            push_prefix(&mut out, prefix);
        }
        out.push(schema.qualified_name(id), Segment::ColumnRegion);
        if with_marks && include_values {
            for v in marks.map(|m| m.values.as_slice()).unwrap_or_default() {
                out.mark(Mark::Amp);
                out.push(v.clone(), Segment::ColumnRegion);
            }
        }
    }
    Ok(out)
}

fn push_prefix(out: &mut AnnotatedInput, marks: Vec<Mark>) {
    for (i, m) in marks.into_iter().enumerate() {
        if i > 0 {
            out.mark(Mark::Amp);
        }
        out.mark(m);
    }
}

/// One `T1 links to T2` statement per linked table pair, `T1` declared
/// before `T2`, in declaration order.
pub fn render_relations(schema: &DatabaseSchema) -> AnnotatedInput {
    let graph = SchemaGraph::build(schema);
    let mut out = AnnotatedInput::new();
    for (a, b) in graph.table_links() {
        out.push(schema.table(a).name.clone(), Segment::RelationRegion);
        out.mark(Mark::LinksTo);
        out.push(schema.table(b).name.clone(), Segment::RelationRegion);
    }
    out
}

/// Assembles the full input: current turn, older turns newest first,
/// previous SQL, linearized schema, relations.
pub fn build_input(
    turns: &QuestionTokens,
    schema: &DatabaseSchema,
    links: &[LinkAnnotation],
    prev_sql: Option<&SqlQuery>,
    options: &AnnotateOptions,
) -> Result<AnnotatedInput, AnnotateError> {
    let mut out = AnnotatedInput::new();
    for (back, turn) in turns.turns().iter().rev().enumerate() {
        if back > 0 {
            out.mark(Mark::TurnSeparator);
        }
        for tok in turn {
            out.push(tok.clone(), Segment::QuestionTurn(back));
        }
    }
    if options.toggles.discourse {
        if let Some(q) = prev_sql {
            for tok in render_sql(q).split(' ') {
                out.push(tok, Segment::PrevSqlRegion);
            }
        }
    }
    let with_marks = options.toggles.schema_property;
    let links = if with_marks { links } else { &[] };
    out.extend(linearize(schema, links, options.include_values, with_marks)?);
    if options.toggles.database_structure {
        out.extend(render_relations(schema));
    }
    Ok(out)
}
