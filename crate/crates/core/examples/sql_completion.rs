//! JOIN completion: a query that names Players and Ranking but skips the
//! table linking them gets Matches and both join keys back.

use std::path::Path;

use sqlmark::complete::{complete_sql, connect_terminals};
use sqlmark::pipeline::load_schemas;
use sqlmark::{parse_sql, render_sql, SchemaGraph};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schemas = load_schemas(&fixtures.join("tables.json"), None)?;
    let wta = schemas.iter().find(|s| s.db_id == "wta_mini").unwrap();
    let graph = SchemaGraph::build(wta);

    let broken = "SELECT Players.First_name FROM Players JOIN Ranking WHERE Ranking.Year = 2016";
    let (fixed, plan) = complete_sql(&parse_sql(broken, Some(wta))?, wta, &graph)?;
    println!("before: {broken}\nafter:  {}", render_sql(&fixed));
    println!("added:  {:?}", plan.added_tables);
    println!("keys:   {:?}", plan.linking_columns);
    for why in &plan.rationale {
        println!("        {why}");
    }

    // already connected queries come back unchanged
    let (again, plan) = complete_sql(&fixed, wta, &graph)?;
    assert!(plan.is_empty() && again == fixed);

    let connector = connect_terminals(&graph, &[0, 2]).map_err(|(a, b)| format!("{a} and {b} are disconnected"))?;
    let names: Vec<&str> = connector.iter().map(|&t| wta.table(t).name.as_str()).collect();
    println!("minimal connector of Players and Ranking: {names:?}");
    Ok(())
}
