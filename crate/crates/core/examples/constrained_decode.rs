//! The decoder wants `singer.Nation`; the schema only has
//! `singer.Citizenship`. Without the trie constraint the made-up column wins;
//! with it, the only reachable identifiers are real ones.

use std::path::Path;

use sqlmark::annotate::AnnotatedInput;
use sqlmark::decode::{
    beam_search, schema_names, schema_violations, BeamConfig, Lexicon, PrefixTrie, ScoreContext, ScriptedScorer,
    Vocabulary,
};
use sqlmark::pipeline::load_schemas;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let schemas = load_schemas(&fixtures.join("tables.json"), None)?;
    let singer = schemas.iter().find(|s| s.db_id == "singer").unwrap();

    let mut vocab = Vocabulary::new();
    vocab.add_schema(singer);
    vocab.add("Nation");
    let trie = PrefixTrie::build(singer, &vocab, false)?;
    let lexicon = Lexicon::new(&trie, &vocab, false);

    let gold = vocab.encode("SELECT singer.Citizenship FROM singer")?;
    // SELECT singer . <column>: the column sits at position 3
    let mut scorer = ScriptedScorer::soft_target(&gold, -20.0, vocab.eos(), vocab.len());
    scorer.prefer_at(3, vocab.id("Nation").unwrap(), 0.0);
    scorer.prefer_at(3, gold[3], -1.0);

    let names = schema_names(singer);
    let source = AnnotatedInput::new();
    let ctx = ScoreContext { example_id: "citizenship", source: &source };
    for constrained in [false, true] {
        let config = BeamConfig { constrained, ..BeamConfig::default() };
        let best = &beam_search(&mut scorer, &ctx, &lexicon, &config)?[0];
        println!(
            "constrained={constrained:<5} {:<45} score {:>6.2}  out-of-schema {:?}",
            vocab.decode(&best.tokens),
            best.score,
            schema_violations(&best.tokens, &vocab, &names)
        );
    }

    let root = lexicon.allowed_tokens(&Default::default());
    println!("{} of {} tokens may open a step; the trie has {} names", root.to_vec().len(), vocab.len(), trie.terminal_count());
    Ok(())
}
