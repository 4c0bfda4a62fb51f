//! Generate a seeded corpus, run every stage over it, and look at the files
//! each stage wrote.
//!
//! ```bash
//! cargo run --release --example synthetic_pipeline -- 42 adversarial
//! ```

use sqlmark::pipeline::{generate, run_pipeline, PipelineConfig, SynthOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let scorer = args.next().unwrap_or_else(|| "oracle".into());

    let dir = std::env::temp_dir().join(format!("sqlmark-synthetic-{seed}"));
    let corpus = generate(&SynthOptions { seed, n_schemas: 5, n_queries: 50, max_turns: 3 });
    corpus.write(&dir)?;
    println!("{} schemas, {} interactions in {}", corpus.schemas.len(), corpus.interactions.len(), dir.display());

    let config = PipelineConfig {
        tables: dir.join("tables.json"),
        dataset: dir.join("examples.jsonl"),
        output_dir: dir.join("out"),
        scorer: scorer.parse()?,
        // the adversarial scorer only shows its effect without the trie
        constrained: scorer != "adversarial",
        seed,
        ..PipelineConfig::default()
    };
    let out = run_pipeline(&config)?;
    let first = &out.outcomes[0];
    println!("\n{}\n  gold:      {}\n  completed: {}\n", first.example_id, first.target, first.completed.as_deref().unwrap_or(""));
    print!("{}", out.report.unwrap().summary());
    let mut files: Vec<_> = std::fs::read_dir(&out.output_dir)?.map(|e| e.unwrap().file_name()).collect();
    files.sort();
    println!("\nwrote {files:?}");
    Ok(())
}
