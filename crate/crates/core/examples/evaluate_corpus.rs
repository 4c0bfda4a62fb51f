//! Exact-set match, logical form, question and interaction match over a
//! tiny two-interaction corpus.

use std::path::Path;

use sqlmark::eval::{score_corpus, EvalExample};
use sqlmark::pipeline::load_schemas;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schemas = load_schemas(&fixtures.join("tables.json"), None)?;
    let lookup = |id: &str| schemas.iter().find(|s| s.db_id == id);

    let rows = [
        ("a", "SELECT count(*) FROM singer", "SELECT COUNT(*) FROM singer"),
        // conjuncts in another order still match
        (
            "a",
            "SELECT Name FROM singer WHERE Birth_Year > 1948 AND Citizenship = 'France'",
            "SELECT Name FROM singer WHERE Citizenship = 'France' AND Birth_Year > 1948",
        ),
        // right shape, wrong value: EM yes, LX no
        ("b", "SELECT Name FROM singer WHERE Birth_Year > 1950", "SELECT Name FROM singer WHERE Birth_Year > 1948"),
        ("b", "SELECT Nation FROM singer", "SELECT Citizenship FROM singer"),
        ("c", "SELECT", "SELECT Title FROM song"),
    ];
    let corpus: Vec<EvalExample> = rows
        .iter()
        .map(|(iid, pred, gold)| EvalExample {
            prediction: pred.to_string(),
            gold: gold.to_string(),
            db_id: "singer".into(),
            interaction_id: iid.to_string(),
        })
        .collect();
    let report = score_corpus(&corpus, lookup)?;
    for (row, v) in rows.iter().zip(&report.verdicts) {
        println!("{:<17} lx={:<5} {}", format!("{:?}", v.verdict), v.lx, row.1);
    }
    print!("\n{}", report.summary());
    Ok(())
}
