use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{
    ColumnDef, ColumnId, ColumnSlot, ColumnType, DatabaseSchema, ForeignKey, KeyEntryIds,
    SchemaError, SpiderLayout, TableDef,
};

/// One entry of a Spider-style `tables.json`. Field names are the dataset's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiderSchemaDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_names: Option<Vec<(i64, String)>>,
    pub column_names_original: Vec<(i64, String)>,
    pub column_types: Vec<String>,
    pub db_id: String,
    pub foreign_keys: Vec<(usize, usize)>,
    pub primary_keys: Vec<KeyEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_names: Option<Vec<String>>,
    pub table_names_original: Vec<String>,
}

/// Newer releases list composite keys as nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyEntry {
    Single(usize),
    Composite(Vec<usize>),
}

/// Cell values keyed by database id, then by `Table.Column`.
pub type ContentSidecar = BTreeMap<String, BTreeMap<String, Vec<String>>>;

pub fn load_schema(doc: &SpiderSchemaDoc) -> Result<DatabaseSchema, SchemaError> {
    let db = &doc.db_id;
    if doc.table_names_original.is_empty() {
        return Err(SchemaError::MalformedDocument(format!("database `{db}` has no tables")));
    }
    if doc.column_types.len() != doc.column_names_original.len() {
        return Err(SchemaError::MalformedDocument(format!(
            "database `{db}`: {} column types for {} columns",
            doc.column_types.len(),
            doc.column_names_original.len()
        )));
    }
    if let Some(names) = &doc.table_names {
        if names.len() != doc.table_names_original.len() {
            return Err(SchemaError::MalformedDocument(format!(
                "database `{db}`: table_names and table_names_original differ in length"
            )));
        }
    }
    if let Some(names) = &doc.column_names {
        if names.len() != doc.column_names_original.len() {
            return Err(SchemaError::MalformedDocument(format!(
                "database `{db}`: column_names and column_names_original differ in length"
            )));
        }
    }

    let mut tables: Vec<TableDef> = doc
        .table_names_original
        .iter()
        .enumerate()
        .map(|(i, name)| TableDef {
            name: name.clone(),
            display_name: doc.table_names.as_ref().map(|n| n[i].clone()),
            columns: Vec::new(),
            primary_key: None,
        })
        .collect();

    let mut layout = SpiderLayout {
        table_display: doc.table_names.is_some(),
        column_display: doc.column_names.is_some(),
        ..Default::default()
    };
    let mut slots: Vec<Option<ColumnId>> = Vec::with_capacity(doc.column_names_original.len());
    for (gi, (table_idx, name)) in doc.column_names_original.iter().enumerate() {
        let raw_type = doc.column_types[gi].clone();
        let display = doc.column_names.as_ref().map(|n| n[gi].1.clone());
        if *table_idx < 0 {
            if name != "*" {
                return Err(SchemaError::MalformedDocument(format!(
                    "database `{db}`: column {gi} has no table but is not `*`"
                )));
            }
            layout.column_order.push(ColumnSlot::Star);
            layout.star_display = display;
            layout.star_type = raw_type;
            slots.push(None);
            continue;
        }
        let ti = *table_idx as usize;
        let table = tables.get_mut(ti).ok_or_else(|| {
            SchemaError::DanglingReference(format!("database `{db}`: column {gi} names table {ti}"))
        })?;
        let (col_type, known) = ColumnType::from_label(&raw_type);
        if !known {
            warn!("{db}: column `{name}` has unknown type `{raw_type}`, treated as Other");
        }
        let id = ColumnId::new(ti, table.columns.len());
        table.columns.push(ColumnDef {
            name: name.clone(),
            display_name: display,
            col_type,
            raw_type,
            is_primary: false,
            sample_values: None,
        });
        layout.column_order.push(ColumnSlot::Column(id));
        slots.push(Some(id));
    }

    let resolve = |gi: usize, what: &str| -> Result<ColumnId, SchemaError> {
        slots.get(gi).copied().flatten().ok_or_else(|| {
            SchemaError::DanglingReference(format!("database `{db}`: {what} references column {gi}"))
        })
    };

    for entry in &doc.primary_keys {
        let ids = match entry {
            KeyEntry::Single(gi) => vec![resolve(*gi, "primary key")?],
            KeyEntry::Composite(gis) => {
                gis.iter().map(|&gi| resolve(gi, "primary key")).collect::<Result<Vec<_>, _>>()?
            }
        };
        let Some(&first) = ids.first() else {
            return Err(SchemaError::MalformedDocument(format!(
                "database `{db}`: empty composite primary key"
            )));
        };
        for &id in &ids {
            let table = &mut tables[id.table];
            if table.primary_key.is_none() && id == first {
                table.primary_key = Some(id.column);
                table.columns[id.column].is_primary = true;
            } else {
                warn!(
                    "{db}: extra key column `{}.{}` kept as a plain column",
                    table.name, table.columns[id.column].name
                );
            }
        }
        layout.primary_keys.push(match entry {
            KeyEntry::Single(_) => KeyEntryIds::Single(first),
            KeyEntry::Composite(_) => KeyEntryIds::Composite(ids),
        });
    }

    let foreign_keys = doc
        .foreign_keys
        .iter()
        .map(|&(a, b)| {
            Ok(ForeignKey { from: resolve(a, "foreign key")?, to: resolve(b, "foreign key")? })
        })
        .collect::<Result<Vec<_>, SchemaError>>()?;

    DatabaseSchema::from_parts(doc.db_id.clone(), tables, foreign_keys, layout)
}

impl DatabaseSchema {
    /// Writes the schema back to the document it was read from.
    pub fn to_spider(&self) -> SpiderSchemaDoc {
        let mut global = HashMap::new();
        let mut names_original = Vec::new();
        let mut names = Vec::new();
        let mut types = Vec::new();
        for (gi, slot) in self.layout.column_order.iter().enumerate() {
            match *slot {
                ColumnSlot::Star => {
                    names_original.push((-1, "*".to_string()));
                    names.push((-1, self.layout.star_display.clone().unwrap_or_else(|| "*".into())));
                    types.push(self.layout.star_type.clone());
                }
                ColumnSlot::Column(id) => {
                    let c = self.column(id);
                    global.insert(id, gi);
                    names_original.push((id.table as i64, c.name.clone()));
                    names.push((
                        id.table as i64,
                        c.display_name.clone().unwrap_or_else(|| display_form(&c.name)),
                    ));
                    types.push(c.raw_type.clone());
                }
            }
        }
        let primary_keys = self
            .layout
            .primary_keys
            .iter()
            .map(|e| match e {
                KeyEntryIds::Single(id) => KeyEntry::Single(global[id]),
                KeyEntryIds::Composite(ids) => {
                    KeyEntry::Composite(ids.iter().map(|id| global[id]).collect())
                }
            })
            .collect();
        let foreign_keys =
            self.foreign_keys().iter().map(|fk| (global[&fk.from], global[&fk.to])).collect();
        SpiderSchemaDoc {
            column_names: self.layout.column_display.then_some(names),
            column_names_original: names_original,
            column_types: types,
            db_id: self.db_id.clone(),
            foreign_keys,
            primary_keys,
            table_names: self.layout.table_display.then(|| {
                self.tables()
                    .iter()
                    .map(|t| t.display_name.clone().unwrap_or_else(|| display_form(&t.name)))
                    .collect()
            }),
            table_names_original: self.tables().iter().map(|t| t.name.clone()).collect(),
        }
    }
}

fn display_form(name: &str) -> String {
    name.replace('_', " ").to_lowercase()
}

pub fn parse_tables_json(text: &str) -> Result<Vec<DatabaseSchema>, SchemaError> {
    let docs: Vec<SpiderSchemaDoc> =
        serde_json::from_str(text).map_err(|e| SchemaError::MalformedDocument(e.to_string()))?;
    docs.iter().map(load_schema).collect()
}

/// Reads a `tables.json`. A directory is accepted and its `tables.json` used.
pub fn load_tables_file(path: impl AsRef<Path>) -> Result<Vec<DatabaseSchema>, SchemaError> {
    let mut path = path.as_ref().to_path_buf();
    if path.is_dir() {
        path.push("tables.json");
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|source| SchemaError::Io { path: path.display().to_string(), source })?;
    parse_tables_json(&text)
}

pub fn write_tables_file(
    path: impl AsRef<Path>,
    schemas: &[DatabaseSchema],
) -> Result<(), SchemaError> {
    let docs: Vec<SpiderSchemaDoc> = schemas.iter().map(|s| s.to_spider()).collect();
    let text = serde_json::to_string_pretty(&docs).expect("schema documents serialize");
    std::fs::write(path.as_ref(), text + "\n")
        .map_err(|source| SchemaError::Io { path: path.as_ref().display().to_string(), source })
}

pub fn load_content_file(path: impl AsRef<Path>) -> Result<ContentSidecar, SchemaError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| SchemaError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| SchemaError::MalformedDocument(e.to_string()))
}

/// Copies sidecar values onto matching columns. Databases absent from the
/// sidecar keep `sample_values = None`; present databases get `Some` on every
/// column so "loaded but empty" stays distinguishable.
pub fn attach_content(
    schema: &mut DatabaseSchema,
    sidecar: &ContentSidecar,
) -> Result<(), SchemaError> {
    let Some(cells) = sidecar.get(&schema.db_id) else {
        return Ok(());
    };
    let ids: Vec<ColumnId> = schema.columns().map(|(id, _)| id).collect();
    for id in ids {
        schema.column_mut(id).sample_values.get_or_insert_with(Vec::new);
    }
    for (column, values) in cells {
        let id = schema.resolve_qualified(column).ok_or_else(|| {
            SchemaError::DanglingReference(format!("content for `{column}` in `{}`", schema.db_id))
        })?;
        schema.column_mut(id).sample_values = Some(values.clone());
    }
    Ok(())
}
