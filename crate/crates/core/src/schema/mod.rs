//! Relational schemas: typed tables, columns and keys loaded from the Spider
//! `tables.json` format, plus the table/column graph used for JOIN inference.

mod graph;
mod spider;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use graph::{EdgeKind, GraphEdge, NodeId, SchemaGraph};
pub use spider::{
    attach_content, load_content_file, load_schema, load_tables_file, parse_tables_json,
    write_tables_file, ContentSidecar, KeyEntry, SpiderSchemaDoc,
};

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed schema document: {0}")]
    MalformedDocument(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("duplicate name `{name}` in {scope}")]
    DuplicateName { name: String, scope: String },
    #[error("unknown database `{0}`")]
    UnknownDatabase(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Position of a column: table index plus index within that table.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct ColumnId {
    pub table: usize,
    pub column: usize,
}

impl ColumnId {
    pub fn new(table: usize, column: usize) -> Self {
        Self { table, column }
    }
}

/// Closed set of column types. Labels outside the known set map to `Other`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ColumnType {
    Integer,
    Real,
    Text,
    Date,
    Boolean,
    Other,
}

impl ColumnType {
    /// Maps a dataset type label to the enum. The flag is false when the label
    /// was not recognised and `Other` is a fallback.
    pub fn from_label(label: &str) -> (Self, bool) {
        let l = label.trim().to_ascii_lowercase();
        let base = l.split('(').next().unwrap_or("").trim();
        let ty = match base {
            "int" | "integer" | "bigint" | "smallint" | "tinyint" | "mediumint" => Self::Integer,
            "number" | "real" | "float" | "double" | "numeric" | "decimal" => Self::Real,
            "text" | "varchar" | "char" | "string" | "nvarchar" | "varchar2" | "clob" => Self::Text,
            "time" | "date" | "datetime" | "timestamp" | "year" => Self::Date,
            "boolean" | "bool" | "bit" => Self::Boolean,
            "other" | "others" => return (Self::Other, true),
            _ => return (Self::Other, false),
        };
        (ty, true)
    }

    /// Surface form used as a structure mark.
    pub fn mark(self) -> &'static str {
        match self {
            Self::Integer => "Integer",
            Self::Real => "Real",
            Self::Text => "Text",
            Self::Date => "Date",
            Self::Boolean => "Boolean",
            Self::Other => "Other",
        }
    }

    /// Default label written when a schema built in code is serialized.
    pub fn label(self) -> &'static str {
        match self {
            Self::Integer => "integer",
            Self::Real => "real",
            Self::Text => "text",
            Self::Date => "date",
            Self::Boolean => "boolean",
            Self::Other => "others",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Self::Integer | Self::Real)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnDef {
    pub name: String,
    /// Human-readable name (`column_names` in Spider), kept for re-serialization.
    pub display_name: Option<String>,
    pub col_type: ColumnType,
    /// Type label exactly as read.
    pub raw_type: String,
    pub is_primary: bool,
    /// `None` when no content was loaded; `Some(vec![])` when content was
    /// loaded and the column is empty.
    pub sample_values: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableDef {
    pub name: String,
    pub display_name: Option<String>,
    pub columns: Vec<ColumnDef>,
    pub primary_key: Option<usize>,
}

impl TableDef {
    pub fn primary_key_column(&self) -> Option<&ColumnDef> {
        self.primary_key.map(|i| &self.columns[i])
    }
}

/// Referencing column `from` points at referenced column `to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from: ColumnId,
    pub to: ColumnId,
}

/// Slot in the flat Spider column list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ColumnSlot {
    Star,
    Column(ColumnId),
}

/// Bookkeeping that only matters for writing the schema back out.
#[derive(Clone, Debug, PartialEq, Default)]
pub(crate) struct SpiderLayout {
    pub column_order: Vec<ColumnSlot>,
    pub star_display: Option<String>,
    pub star_type: String,
    pub primary_keys: Vec<KeyEntryIds>,
    pub table_display: bool,
    pub column_display: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum KeyEntryIds {
    Single(ColumnId),
    Composite(Vec<ColumnId>),
}

/// A validated database schema. Immutable once built; identifier lookups are
/// case-insensitive and the original casing is kept for rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct DatabaseSchema {
    pub db_id: String,
    tables: Vec<TableDef>,
    foreign_keys: Vec<ForeignKey>,
    layout: SpiderLayout,
    table_lookup: HashMap<String, usize>,
    column_lookup: Vec<HashMap<String, usize>>,
}

impl DatabaseSchema {
    pub(crate) fn from_parts(
        db_id: String,
        tables: Vec<TableDef>,
        foreign_keys: Vec<ForeignKey>,
        layout: SpiderLayout,
    ) -> Result<Self, SchemaError> {
        if tables.is_empty() {
            return Err(SchemaError::MalformedDocument(format!("database `{db_id}` has no tables")));
        }
        let mut table_lookup = HashMap::new();
        let mut column_lookup = Vec::with_capacity(tables.len());
        for (ti, table) in tables.iter().enumerate() {
            if table.name.trim().is_empty() {
                return Err(SchemaError::MalformedDocument(format!("table {ti} has an empty name")));
            }
            if table_lookup.insert(table.name.to_lowercase(), ti).is_some() {
                return Err(SchemaError::DuplicateName {
                    name: table.name.clone(),
                    scope: format!("database `{db_id}`"),
                });
            }
            let mut cols = HashMap::new();
            for (ci, col) in table.columns.iter().enumerate() {
                if col.name.trim().is_empty() {
                    return Err(SchemaError::MalformedDocument(format!(
                        "column {ci} of `{}` has an empty name",
                        table.name
                    )));
                }
                if cols.insert(col.name.to_lowercase(), ci).is_some() {
                    return Err(SchemaError::DuplicateName {
                        name: col.name.clone(),
                        scope: format!("table `{}`", table.name),
                    });
                }
            }
            if let Some(pk) = table.primary_key {
                if pk >= table.columns.len() {
                    return Err(SchemaError::DanglingReference(format!(
                        "primary key {pk} of `{}`",
                        table.name
                    )));
                }
            }
            column_lookup.push(cols);
        }
        let schema = Self { db_id, tables, foreign_keys, layout, table_lookup, column_lookup };
        for fk in &schema.foreign_keys {
            for end in [fk.from, fk.to] {
                if !schema.contains_column(end) {
                    return Err(SchemaError::DanglingReference(format!(
                        "foreign key endpoint {end:?}"
                    )));
                }
            }
        }
        Ok(schema)
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn table(&self, index: usize) -> &TableDef {
        &self.tables[index]
    }

    pub fn foreign_keys(&self) -> &[ForeignKey] {
        &self.foreign_keys
    }

    pub fn contains_column(&self, id: ColumnId) -> bool {
        self.tables.get(id.table).is_some_and(|t| id.column < t.columns.len())
    }

    pub fn column(&self, id: ColumnId) -> &ColumnDef {
        &self.tables[id.table].columns[id.column]
    }

    pub(crate) fn column_mut(&mut self, id: ColumnId) -> &mut ColumnDef {
        &mut self.tables[id.table].columns[id.column]
    }

    /// All real columns (the `*` pseudo-column excluded) in declaration order.
    pub fn columns(&self) -> impl Iterator<Item = (ColumnId, &ColumnDef)> + '_ {
        self.tables.iter().enumerate().flat_map(|(ti, t)| {
            t.columns.iter().enumerate().map(move |(ci, c)| (ColumnId::new(ti, ci), c))
        })
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.table_lookup.get(&name.to_lowercase()).copied()
    }

    pub fn column_index(&self, table: usize, name: &str) -> Option<ColumnId> {
        self.column_lookup
            .get(table)?
            .get(&name.to_lowercase())
            .map(|&c| ColumnId::new(table, c))
    }

    /// Resolves `Table.Column` (case-insensitive).
    pub fn resolve_qualified(&self, qualified: &str) -> Option<ColumnId> {
        let (t, c) = qualified.split_once('.')?;
        self.column_index(self.table_index(t.trim())?, c.trim())
    }

    pub fn qualified_name(&self, id: ColumnId) -> String {
        format!("{}.{}", self.tables[id.table].name, self.column(id).name)
    }

    /// Tables owning a column with this name, in declaration order.
    pub fn tables_with_column(&self, name: &str) -> Vec<usize> {
        let key = name.to_lowercase();
        (0..self.tables.len()).filter(|&t| self.column_lookup[t].contains_key(&key)).collect()
    }

    pub fn has_content(&self) -> bool {
        self.columns().any(|(_, c)| c.sample_values.is_some())
    }
}

impl fmt::Display for DatabaseSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.db_id)?;
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{}[", t.name)?;
            for (j, c) in t.columns.iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", c.name)?;
            }
            write!(f, "]")?;
        }
        write!(f, ")")
    }
}

/// Builds a schema in code. Validation happens in [`SchemaBuilder::build`].
#[derive(Debug, Clone)]
pub struct SchemaBuilder {
    db_id: String,
    tables: Vec<TableDef>,
    fks: Vec<((String, String), (String, String))>,
}

impl SchemaBuilder {
    pub fn new(db_id: impl Into<String>) -> Self {
        Self { db_id: db_id.into(), tables: Vec::new(), fks: Vec::new() }
    }

    pub fn table(mut self, name: &str, columns: &[(&str, ColumnType)]) -> Self {
        self.tables.push(TableDef {
            name: name.to_string(),
            display_name: None,
            columns: columns
                .iter()
                .map(|&(n, t)| ColumnDef {
                    name: n.to_string(),
                    display_name: None,
                    col_type: t,
                    raw_type: t.label().to_string(),
                    is_primary: false,
                    sample_values: None,
                })
                .collect(),
            primary_key: None,
        });
        self
    }

    /// Marks `column` of the most recently added table as its primary key.
    pub fn primary_key(mut self, column: &str) -> Self {
        let table = self.tables.last_mut().expect("primary_key called before table");
        let idx = table
            .columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(column))
            .unwrap_or_else(|| panic!("no column `{column}` in `{}`", table.name));
        table.primary_key = Some(idx);
        table.columns[idx].is_primary = true;
        self
    }

    /// Values for `column` of the most recently added table.
    pub fn values(mut self, column: &str, values: &[&str]) -> Self {
        let table = self.tables.last_mut().expect("values called before table");
        let col = table
            .columns
            .iter_mut()
            .find(|c| c.name.eq_ignore_ascii_case(column))
            .unwrap_or_else(|| panic!("no column `{column}`"));
        col.sample_values = Some(values.iter().map(|v| v.to_string()).collect());
        self
    }

    /// `from` and `to` are `Table.Column` strings.
    pub fn foreign_key(mut self, from: &str, to: &str) -> Self {
        let split = |s: &str| {
            let (t, c) = s.split_once('.').expect("foreign key endpoints must be Table.Column");
            (t.to_string(), c.to_string())
        };
        self.fks.push((split(from), split(to)));
        self
    }

    pub fn build(self) -> Result<DatabaseSchema, SchemaError> {
        let mut layout = SpiderLayout { star_type: "text".into(), ..Default::default() };
        layout.column_order.push(ColumnSlot::Star);
        for (ti, t) in self.tables.iter().enumerate() {
            for ci in 0..t.columns.len() {
                layout.column_order.push(ColumnSlot::Column(ColumnId::new(ti, ci)));
            }
            if let Some(pk) = t.primary_key {
                layout.primary_keys.push(KeyEntryIds::Single(ColumnId::new(ti, pk)));
            }
        }
        let mut schema = DatabaseSchema::from_parts(self.db_id, self.tables, Vec::new(), layout)?;
        let mut fks = Vec::new();
        for ((ft, fc), (tt, tc)) in &self.fks {
            let find = |t: &str, c: &str| {
                schema
                    .table_index(t)
                    .and_then(|ti| schema.column_index(ti, c))
                    .ok_or_else(|| SchemaError::DanglingReference(format!("{t}.{c}")))
            };
            fks.push(ForeignKey { from: find(ft, fc)?, to: find(tt, tc)? });
        }
        schema.foreign_keys = fks;
        Ok(schema)
    }
}
