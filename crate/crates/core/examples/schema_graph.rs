//! Load the bundled Spider-format schemas and walk their graphs.
//!
//! ```bash
//! cargo run --example schema_graph
//! cargo run --example schema_graph -- path/to/tables.json
//! ```

use std::path::PathBuf;

use sqlmark::schema::{load_tables_file, EdgeKind, SchemaGraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tables.json"));
    for schema in load_tables_file(&path)? {
        let graph = SchemaGraph::build(&schema);
        let count = |k: EdgeKind| graph.edges().iter().filter(|e| e.kind == k).count();
        println!(
            "{}: {} tables, {} columns, {} nodes ({} affiliation / {} foreign-key / {} table-link edges)",
            schema.db_id,
            schema.tables().len(),
            schema.column_count(),
            graph.node_count(),
            count(EdgeKind::Affiliation),
            count(EdgeKind::ForeignKey),
            count(EdgeKind::TableLink),
        );
        for fk in schema.foreign_keys() {
            println!("  {} -> {}", schema.qualified_name(fk.from), schema.qualified_name(fk.to));
        }
        // hop distances from the first table
        let first = &schema.table(0).name;
        for (t, d) in graph.table_distances(0).iter().enumerate() {
            let d = d.map_or("unreachable".to_string(), |d| format!("{d} hop(s)"));
            println!("  {first} .. {}: {d}", schema.table(t).name);
        }
    }
    Ok(())
}
