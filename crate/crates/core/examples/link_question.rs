//! Schema linking: which question n-grams name a table, a column or a
//! stored cell value.
//!
//! ```bash
//! cargo run --example link_question
//! cargo run --example link_question -- singer "Which singers have French citizenship?"
//! ```

use std::path::Path;

use sqlmark::linking::{link_all, Language, QuestionTokens, DEFAULT_MAX_NGRAM};
use sqlmark::pipeline::load_schemas;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let db_id = args.next().unwrap_or_else(|| "singer".into());
    let question = args.next().unwrap_or_else(|| "List the names of singers whose citizenship is France".into());

    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schemas = load_schemas(&fixtures.join("tables.json"), Some(&fixtures.join("content.json")))?;
    let schema = schemas.iter().find(|s| s.db_id == db_id).ok_or("no such database")?;

    let q = QuestionTokens::from_texts(&[question.as_str()], Language::En)?;
    let words = q.current();
    println!("{}", words.join(" "));
    for link in link_all(&q, schema, DEFAULT_MAX_NGRAM) {
        let span = words[link.span.start..link.span.end].join(" ");
        println!("  {:<14} {:<24} -> {}", link.kind.mark(), format!("\"{span}\""), link.target.describe(schema));
    }
    Ok(())
}
