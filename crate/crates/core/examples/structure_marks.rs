//! Structure-marked inputs: schema properties, database structure and
//! dialogue history, each family switchable.

use std::path::Path;

use sqlmark::annotate::{build_input, AnnotateOptions};
use sqlmark::linking::{link_all, Language, QuestionTokens, DEFAULT_MAX_NGRAM};
use sqlmark::pipeline::load_schemas;
use sqlmark::{parse_sql, Mark, MarkToggles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schemas = load_schemas(&fixtures.join("tables.json"), None)?;
    let wta = schemas.iter().find(|s| s.db_id == "wta_mini").unwrap();

    let turns = ["Show the players", "Which player has the most ranking points in 2016?"];
    let q = QuestionTokens::from_texts(&turns, Language::En)?;
    let links = link_all(&q, wta, DEFAULT_MAX_NGRAM);
    let prev = parse_sql("SELECT Players.First_name FROM Players", Some(wta))?;

    let variants = [
        ("all marks", MarkToggles::default()),
        ("no schema marks", MarkToggles { schema_property: false, ..MarkToggles::default() }),
        ("no relations", MarkToggles { database_structure: false, ..MarkToggles::default() }),
        ("no previous SQL", MarkToggles { discourse: false, ..MarkToggles::default() }),
        ("vanilla", MarkToggles::vanilla()),
    ];
    for (name, toggles) in variants {
        let options = AnnotateOptions { toggles, include_values: true };
        let input = build_input(&q, wta, &links, Some(&prev), &options)?;
        println!("== {name} ({} tokens)\n{}\n", input.len(), input.render());
    }

    let input = build_input(&q, wta, &links, Some(&prev), &AnnotateOptions::default())?;
    let toks = input.tokens();
    let end = toks.iter().position(|t| t == "Ranking.Player_id").unwrap();
    let mut start = end;
    while start > 0 && Mark::parse(&toks[start - 1]).is_some() {
        start -= 1;
    }
    println!("Ranking.Player_id is serialized as: {}", toks[start..=end].join(" "));
    Ok(())
}
