//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; any FAIL makes the target
//! exit non-zero.

mod common;

use std::collections::BTreeMap;
use std::hint::black_box;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqlmark::annotate::{build_input, AnnotateOptions};
use sqlmark::complete::{complete_sql, connect_terminals};
use sqlmark::decode::{
    beam_search, identifier_runs, schema_names, schema_violations, BeamConfig, Cursor, DecodeError, DecodeState, Lexicon,
    PrefixTrie, RandomScorer, ScoreContext, ScriptedScorer, Vocabulary,
};
use sqlmark::eval::{exact_set_match, score_corpus, EvalExample};
use sqlmark::linking::{link_all, Language, QuestionTokens, DEFAULT_MAX_NGRAM};
use sqlmark::pipeline::{generate, generate_synthetic_corpus, run_pipeline, synth, PipelineConfig, SynthOptions};
use sqlmark::schema::{load_tables_file, ColumnType, DatabaseSchema, SchemaBuilder, SpiderSchemaDoc};
use sqlmark::{parse_sql, render_sql, AnnotatedInput, Mark, SchemaGraph};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed <= limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

/// The marks in front of `Ranking.Player_id` for a question that mentions
/// "player" but not "player id".
fn golden_mark() -> Outcome {
    let start = Instant::now();
    let wta = common::fixture("wta_mini");
    let q = QuestionTokens::from_texts(&["Which player has the most ranking points in 2016?"], Language::En)
        .map_err(|e| e.to_string())?;
    let links = link_all(&q, &wta, DEFAULT_MAX_NGRAM);
    let input = build_input(&q, &wta, &links, None, &AnnotateOptions::default()).map_err(|e| e.to_string())?;
    let toks = input.tokens();
    let end = toks.iter().position(|t| t == "Ranking.Player_id").ok_or("column missing from the input")?;
    let mut from = end;
    while from > 0 && Mark::parse(&toks[from - 1]).is_some() {
        from -= 1;
    }
    let got = toks[from..=end].join(" ");
    let want = "Partial-Match & Primary-Key & Integer Ranking.Player_id";
    check(got == want, format!("got `{got}`"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("`{got}` in {:.1?}", start.elapsed()))
}

fn oracle_completeness() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = generate_synthetic_corpus(2024, 20, 200);
    check(corpus.schemas.len() == 20 && corpus.queries().count() == 200, "corpus has the wrong size")?;
    corpus.write(dir.path()).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        tables: dir.path().join("tables.json"),
        dataset: dir.path().join("examples.jsonl"),
        output_dir: dir.path().join("out"),
        ..PipelineConfig::default()
    };
    check(cfg.constrained && cfg.scorer == sqlmark::pipeline::ScorerSpec::Oracle, "default config changed")?;
    let out = run_pipeline(&cfg).map_err(|e| e.to_string())?;
    let report = out.report.ok_or("no report")?;
    let exact = out.outcomes.iter().filter(|o| o.decoded.as_deref() == Some(o.target.as_str())).count();
    check(out.outcomes.len() == 200, format!("{} of 200 questions ran", out.outcomes.len()))?;
    check(exact == 200, format!("{exact}/200 decoded byte-identical to the target"))?;
    check(report.qm == 1.0, format!("QM = {}", report.qm))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("200/200 targets reproduced, QM = {:.1} in {:.1?}", report.qm, start.elapsed()))
}

fn schema_faithfulness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut steps = 0usize;
    let mut runs = 0usize;
    let mut seq = 0u64;
    while steps < 10_000 {
        let schema = synth::random_schema(&mut rng, "fuzz");
        let mut vocab = Vocabulary::new();
        vocab.add_schema(&schema);
        vocab.add_text("SELECT 'Lyon' Nation nation_name 12 3.5");
        let trie = PrefixTrie::build(&schema, &vocab, false).map_err(|e| e.to_string())?;
        let lexicon = Lexicon::new(&trie, &vocab, false);
        let names = schema_names(&schema);
        for _ in 0..5 {
            // beam search under a uniformly random scorer
            let mut scorer = RandomScorer::new(seq, vocab.eos(), vocab.len());
            seq += 1;
            let source = AnnotatedInput::new();
            let ctx = ScoreContext { example_id: "fuzz", source: &source };
            let cfg = BeamConfig { width: 3, max_len: 60, ..BeamConfig::default() };
            // every beam stuck inside a name or literal at max_len emits nothing
            let hyps = match beam_search(&mut scorer, &ctx, &lexicon, &cfg) {
                Err(DecodeError::NoValidHypothesis) => Vec::new(),
                r => r.map_err(|e| e.to_string())?,
            };
            for h in hyps {
                steps += h.tokens.len() + 1;
                runs += identifier_runs(&h.tokens, &vocab).len();
                let bad = schema_violations(&h.tokens, &vocab, &names);
                check(bad.is_empty(), format!("out-of-schema runs {bad:?} in `{}`", vocab.decode(&h.tokens)))?;
            }
            // and a uniform walk over the allowed sets
            let (tokens, n) = common::random_walk(&mut rng, &lexicon, 30);
            steps += n;
            runs += identifier_runs(&tokens, &vocab).len();
            let bad = schema_violations(&tokens, &vocab, &names);
            check(bad.is_empty(), format!("out-of-schema runs {bad:?} in `{}`", vocab.decode(&tokens)))?;
        }
    }

    // Nation vs Citizenship
    let singer = common::fixture("singer");
    let mut vocab = Vocabulary::new();
    vocab.add_schema(&singer);
    vocab.add("Nation");
    let trie = PrefixTrie::build(&singer, &vocab, false).map_err(|e| e.to_string())?;
    let lexicon = Lexicon::new(&trie, &vocab, false);
    let gold = vocab.encode("SELECT singer.Citizenship FROM singer").map_err(|e| e.to_string())?;
    let mut scorer = ScriptedScorer::soft_target(&gold, -20.0, vocab.eos(), vocab.len());
    scorer.prefer_at(3, vocab.id("Nation").unwrap(), 0.0);
    scorer.prefer_at(3, gold[3], -1.0);
    let names = schema_names(&singer);
    let source = AnnotatedInput::new();
    let ctx = ScoreContext { example_id: "nation", source: &source };
    let mut decode = |constrained| {
        let cfg = BeamConfig { constrained, ..BeamConfig::default() };
        beam_search(&mut scorer, &ctx, &lexicon, &cfg).map(|h| h[0].tokens.clone()).map_err(|e| e.to_string())
    };
    let free = decode(false)?;
    let masked = decode(true)?;
    let violations = schema_violations(&free, &vocab, &names);
    check(!violations.is_empty(), format!("unconstrained decode `{}` stayed in schema", vocab.decode(&free)))?;
    check(
        vocab.decode(&masked) == "SELECT singer.Citizenship FROM singer",
        format!("constrained decode gave `{}`", vocab.decode(&masked)),
    )?;
    Ok(format!(
        "{steps} steps, {runs} identifier runs, 0 outside the schema; unconstrained gives {violations:?}, constrained gives singer.Citizenship"
    ))
}

fn completion_optimality() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sets = 0;
    for _ in 0..100 {
        let (n, edges) = common::random_graph(&mut rng, 8);
        let schema = common::graph_schema(n, &edges);
        let graph = SchemaGraph::build(&schema);
        for terms in common::subsets_up_to(n, 4) {
            let want = common::brute_force_connector(n, &edges, &terms);
            let got = connect_terminals(&graph, &terms).ok();
            check(got == want, format!("{n} tables, edges {edges:?}, terminals {terms:?}: got {got:?}, want {want:?}"))?;
            sets += 1;
        }
    }
    // Players / Ranking through Matches
    let wta = common::fixture("wta_mini");
    let graph = SchemaGraph::build(&wta);
    let broken = parse_sql("SELECT Players.First_name FROM Players JOIN Ranking WHERE Ranking.Year = 2016", Some(&wta))
        .map_err(|e| e.to_string())?;
    let (done, plan) = complete_sql(&broken, &wta, &graph).map_err(|e| e.to_string())?;
    let want = "SELECT Players.First_name FROM Players JOIN Matches ON Matches.Winner_id = Players.Player_id \
                JOIN Ranking ON Ranking.Player_id = Matches.Winner_id WHERE Ranking.Year = 2016";
    check(render_sql(&done) == want, format!("completed to `{}`", render_sql(&done)))?;
    check(plan.added_tables == ["Matches"], format!("added {:?}", plan.added_tables))?;
    check(plan.linking_columns == ["Matches.Winner_id"], format!("linking columns {:?}", plan.linking_columns))?;
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{sets} terminal sets over 100 graphs match the exhaustive oracle; Matches.Winner_id recovered in {:.1?}", start.elapsed()))
}

fn metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pool = generate(&SynthOptions { seed: 5, n_schemas: 6, n_queries: 300, max_turns: 4 });
    let by_id: BTreeMap<&str, &DatabaseSchema> = pool.schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let lookup = |id: &str| by_id.get(id).copied();

    // IM against QM, with QM and IM recomputed from the verdicts
    let mut violations = Vec::new();
    for c in 0..1000 {
        let k = rng.gen_range(1..=6);
        let mut corpus = Vec::new();
        for it in pool.interactions.choose_multiple(&mut rng, k) {
            let other = pool.interactions.iter().find(|o| o.db_id == it.db_id && o.id != it.id);
            for turn in &it.turns {
                let prediction = match rng.gen_range(0..4) {
                    0 => "SELECT".to_string(),
                    1 => other.map_or("SELECT".into(), |o| o.turns[0].query.clone()),
                    _ => turn.query.clone(),
                };
                corpus.push(EvalExample {
                    prediction,
                    gold: turn.query.clone(),
                    db_id: it.db_id.clone(),
                    interaction_id: it.id.clone(),
                });
            }
        }
        let r = score_corpus(&corpus, lookup).map_err(|e| e.to_string())?;
        let mut groups: BTreeMap<&str, (usize, bool)> = BTreeMap::new();
        let mut matched = 0;
        for (ex, v) in corpus.iter().zip(&r.verdicts) {
            let m = v.verdict == sqlmark::eval::Verdict::Match;
            matched += m as usize;
            let g = groups.entry(&ex.interaction_id).or_insert((0, true));
            g.0 += 1;
            g.1 &= m;
        }
        check((r.qm - matched as f64 / corpus.len() as f64).abs() < 1e-12, format!("corpus {c}: QM arithmetic"))?;
        if let Some(im) = r.im {
            let all = groups.values().filter(|g| g.1).count() as f64 / groups.len() as f64;
            check((im - all).abs() < 1e-12, format!("corpus {c}: IM arithmetic"))?;
            if im > r.qm {
                let sizes: Vec<String> =
                    groups.values().map(|(n, ok)| format!("{n}{}", if *ok { "+" } else { "-" })).collect();
                violations.push(format!("corpus {c}: IM {im:.3} > QM {:.3}, turns per interaction {}", r.qm, sizes.join(" ")));
            }
        }
    }

    // conjunct order does not matter
    let mut pairs = 0;
    while pairs < 500 {
        let schema = pool.schemas.choose(&mut rng).unwrap();
        let t = rng.gen_range(0..schema.tables().len());
        if schema.table(t).columns.len() < 2 {
            continue;
        }
        let conj = common::random_conjuncts(&mut rng, schema, t);
        let mut perm = conj.clone();
        while perm == conj {
            perm.shuffle(&mut rng);
        }
        let table = &schema.table(t).name;
        let select = &schema.table(t).columns[0].name;
        let a = parse_sql(&common::conjunctive_query(table, select, &conj), Some(schema)).map_err(|e| e.to_string())?;
        let b = parse_sql(&common::conjunctive_query(table, select, &perm), Some(schema)).map_err(|e| e.to_string())?;
        check(exact_set_match(&a, &b), format!("{conj:?} vs {perm:?}"))?;
        pairs += 1;
    }

    // gold against gold
    let corpus: Vec<EvalExample> = pool
        .interactions
        .iter()
        .flat_map(|it| {
            it.turns.iter().map(|t| EvalExample {
                prediction: t.query.clone(),
                gold: t.query.clone(),
                db_id: it.db_id.clone(),
                interaction_id: it.id.clone(),
            })
        })
        .collect();
    let r = score_corpus(&corpus, lookup).map_err(|e| e.to_string())?;
    check(
        r.lx == 1.0 && r.em == 1.0 && r.qm == 1.0 && r.im == Some(1.0),
        format!("gold vs gold: lx {} em {} qm {} im {:?}", r.lx, r.em, r.qm, r.im),
    )?;
    let rest = format!("500 permuted pairs match, gold vs gold = 1.0 over {} questions", r.examples);
    // IM counts interactions and QM counts questions, so a short correct
    // interaction next to a long wrong one puts IM above QM.
    check(violations.is_empty(), format!("IM > QM on {} of 1000 corpora (first: {}); {rest}", violations.len(), violations.first().map_or("", |v| v.as_str())))?;
    Ok(format!("IM <= QM on 1000 corpora, {rest}"))
}

fn wide_schema(tables: usize, columns_per_table: usize) -> DatabaseSchema {
    let mut b = SchemaBuilder::new(format!("wide{tables}x{columns_per_table}"));
    let cols: Vec<String> = (0..columns_per_table).map(|c| format!("col_{c}")).collect();
    for t in 0..tables {
        let typed: Vec<(&str, ColumnType)> = cols.iter().map(|c| (c.as_str(), ColumnType::Integer)).collect();
        b = b.table(&format!("table_{t}"), &typed);
    }
    b.build().unwrap()
}

/// Mean nanoseconds per `allowed_tokens` call plus one membership probe,
/// cycling through states at the root, on a table name, mid-path after
/// `T .`, on a finished column and inside a literal.
fn mean_latency(schema: &DatabaseSchema, calls: usize) -> f64 {
    let mut vocab = Vocabulary::new();
    vocab.add_schema(schema);
    let trie = PrefixTrie::build(schema, &vocab, false).unwrap();
    let lexicon = Lexicon::new(&trie, &vocab, false);
    let t = &schema.table(schema.tables().len() - 1);
    let path = vocab.encode_tokens(&[t.name.as_str(), ".", t.columns.last().unwrap().name.as_str()]).unwrap();
    let table = trie.walk(&path[..1]).unwrap();
    let dot = trie.walk(&path[..2]).unwrap();
    let column = trie.walk(&path).unwrap();
    let states = [
        DecodeState::new(),
        DecodeState { cursor: Cursor::AtNode(table), ..DecodeState::new() },
        DecodeState { cursor: Cursor::AtNode(dot), ..DecodeState::new() },
        DecodeState { cursor: Cursor::AtNode(column), ..DecodeState::new() },
        DecodeState { in_literal: true, ..DecodeState::new() },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let probes: Vec<u32> = (0..1024).map(|_| rng.gen_range(0..vocab.len() as u32)).collect();
    let mut hits = 0usize;
    let start = Instant::now();
    for i in 0..calls {
        let allowed = lexicon.allowed_tokens(black_box(&states[i % states.len()]));
        hits += allowed.contains(black_box(probes[i % probes.len()])) as usize;
    }
    let elapsed = start.elapsed();
    black_box(hits);
    elapsed.as_nanos() as f64 / calls as f64
}

fn constant_time_lookup() -> Outcome {
    let big = wide_schema(100, 100);
    let small = wide_schema(2, 5);
    check(big.column_count() == 10_000 && small.column_count() == 10, "schema sizes")?;
    // warm up, then take the median of five runs of 100k calls each
    mean_latency(&big, 100_000);
    mean_latency(&small, 100_000);
    let median = |s: &DatabaseSchema| {
        let mut v: Vec<f64> = (0..5).map(|_| mean_latency(s, 100_000)).collect();
        v.sort_by(f64::total_cmp);
        v[2]
    };
    let (b, s) = (median(&big), median(&small));
    let ratio = b / s;
    check(ratio <= 2.0, format!("10k columns {b:.1} ns vs 10 columns {s:.1} ns, ratio {ratio:.2}"))?;
    Ok(format!("10k columns {b:.1} ns/call, 10 columns {s:.1} ns/call, ratio {ratio:.2}"))
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let schemas: Vec<DatabaseSchema> = (0..10).map(|i| synth::random_schema(&mut rng, &format!("db{i}"))).collect();
    let graphs: Vec<SchemaGraph> = schemas.iter().map(SchemaGraph::build).collect();
    for i in 0..1000 {
        let k = i % schemas.len();
        let q = synth::random_query(&mut rng, &schemas[k], &graphs[k]);
        let text = render_sql(&q);
        let back = parse_sql(&text, Some(&schemas[k])).map_err(|e| format!("`{text}`: {e}"))?;
        check(back == q, format!("`{text}` parses to a different tree"))?;
        check(render_sql(&back) == text, format!("`{text}` re-renders differently"))?;
    }
    let path = common::fixtures().join("tables.json");
    let raw: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let loaded = load_tables_file(&path).map_err(|e| e.to_string())?;
    let docs: Vec<SpiderSchemaDoc> = loaded.iter().map(|s| s.to_spider()).collect();
    let again = serde_json::to_value(&docs).map_err(|e| e.to_string())?;
    check(again == raw, "fixture tables.json changes on re-serialization")?;
    Ok(format!("1000 queries round-trip; {} fixture schemas re-serialize identically", loaded.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("golden structure mark", golden_mark),
        ("oracle completeness", oracle_completeness),
        ("schema faithfulness", schema_faithfulness),
        ("completion optimality", completion_optimality),
        ("metric properties", metric_properties),
        ("constant-time lookup", constant_time_lookup),
        ("round-trips", round_trips),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: panicked", i + 1);
            }
        }
    }
    println!(
        "criterion 8: NOT REPRODUCIBLE  headline benchmark accuracies need a fine-tuned language model; \
         attach one through the external scorer protocol"
    );
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
