//! The SQL subset of the text-to-SQL benchmarks: parsing, canonical
//! rendering, schema resolution, mention extraction and component sets for
//! exact-set matching.

mod ast;
mod components;
mod parser;
mod render;
mod resolve;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::schema::DatabaseSchema;

pub use ast::*;
pub use components::{component_set, ComponentSet, ConditionKey, OperandKey, UnitKey, ValueMode};
pub use parser::parse_unresolved;
pub use render::render_sql;
pub use resolve::resolve;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SqlError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("cannot resolve column `{0}`")]
    UnresolvableColumn(String),
    #[error("column `{column}` is ambiguous between {candidates:?}")]
    AmbiguousColumn { column: String, candidates: Vec<String> },
}

impl SqlError {
    pub(crate) fn syntax(position: usize, message: impl Into<String>) -> Self {
        Self::Syntax { position, message: message.into() }
    }

    /// True for errors that come from the schema rather than the grammar.
    pub fn is_schema_violation(&self) -> bool {
        !matches!(self, Self::Syntax { .. })
    }
}

/// Parses `text`; with a schema, columns are resolved to `Table.Column`
/// and aliases removed.
pub fn parse_sql(text: &str, schema: Option<&DatabaseSchema>) -> Result<SqlQuery, SqlError> {
    let q = parse_unresolved(text)?;
    match schema {
        Some(s) => resolve(&q, s),
        None => Ok(q),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Mentions {
    pub tables: BTreeSet<String>,
    /// `Table.Column`, or `Table.*` for a star under that table's FROM.
    pub columns: BTreeSet<String>,
}

/// Tables and columns the query refers to anywhere, nested queries included.
pub fn mentioned_schema(q: &SqlQuery) -> Mentions {
    let mut m = Mentions::default();
    for_each_query(q, &mut |level| {
        let (tables, columns) = level_mentions(level);
        m.tables.extend(tables);
        m.columns.extend(columns);
    });
    m
}

/// Mentions of a single query level, nested subqueries excluded.
pub fn level_mentions(q: &SqlQuery) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut tables: BTreeSet<String> = q.from.tables.iter().map(|t| t.name.clone()).collect();
    let mut columns = BTreeSet::new();
    for c in level_columns(q) {
        match (&c.table, c.is_star()) {
            (None, true) => {
                for t in &q.from.tables {
                    columns.insert(format!("{}.*", t.name));
                }
            }
            (Some(t), _) => {
                tables.insert(t.clone());
                columns.insert(format!("{t}.{}", c.column));
            }
            (None, false) => {
                columns.insert(c.column.clone());
            }
        }
    }
    (tables, columns)
}
