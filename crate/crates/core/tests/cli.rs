mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufReader;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::thread;

use serde_json::Value;

use sqlmark::decode::remote::{serve, ENDPOINT_ENV};
use sqlmark::decode::{OracleScorer, ScoreContext, ScorerError, TokenId, TokenScorer, Vocabulary};

fn sqlmark(args: &[&str]) -> Output {
    sqlmark_env(args, &[])
}

fn sqlmark_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sqlmark"));
    cmd.args(args).env_remove(ENDPOINT_ENV);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn config() -> String {
    common::fixtures().join("config.toml").display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = out.display().to_string();
    assert!(sqlmark(&["run", "-c", &config(), "-o", &o, "--workers", "3"]).status.success());
    let first = files(&out);
    fs::remove_dir_all(&out).unwrap();
    assert!(sqlmark(&["run", "-c", &config(), "-o", &o, "--workers", "1"]).status.success());
    let second = files(&out);
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        if name == "config.toml" {
            // the effective config records the worker count and nothing else differs
            let lines = |b: &[u8]| -> Vec<String> {
                String::from_utf8_lossy(b).lines().filter(|l| !l.starts_with("workers")).map(String::from).collect()
            };
            assert_eq!(lines(bytes), lines(&second[name]));
            continue;
        }
        assert!(bytes == &second[name], "{name} differs between runs");
    }
    for name in ["links.jsonl", "annotated.tsv", "pairs.txt", "decoded.sql", "completed.sql", "report.json"] {
        assert!(first.contains_key(name), "{name} missing");
    }
    let r = report(&out);
    assert_eq!((r["qm"].as_f64(), r["im"].as_f64()), (Some(1.0), Some(1.0)));
}

/// The vanilla layout built straight from the raw fixture files: questions
/// newest first, then every table, then every qualified column.
fn vanilla_by_hand() -> String {
    let fx = common::fixtures();
    let tables: Vec<Value> = serde_json::from_str(&fs::read_to_string(fx.join("tables.json")).unwrap()).unwrap();
    let layout: HashMap<&str, String> = tables
        .iter()
        .map(|db| {
            let names: Vec<&str> = db["table_names_original"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
            let cols: Vec<String> = db["column_names_original"]
                .as_array()
                .unwrap()
                .iter()
                .filter_map(|c| {
                    let t = c[0].as_i64().unwrap();
                    (t >= 0).then(|| format!("{}.{}", names[t as usize], c[1].as_str().unwrap()))
                })
                .collect();
            (db["db_id"].as_str().unwrap(), format!("[TABLE] {} [COLUMN] {}", names.join(" "), cols.join(" ")))
        })
        .collect();
    let words = |q: &str| -> String {
        q.split_whitespace()
            .map(|w| w.trim_end_matches(['?', '.', ',', '!']))
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = String::new();
    let mut history: Vec<(String, Vec<String>)> = Vec::new();
    for line in fs::read_to_string(fx.join("dev.jsonl")).unwrap().lines().filter(|l| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).unwrap();
        let iid = v["interaction_id"].as_str().unwrap().to_string();
        match history.last_mut() {
            Some((id, turns)) if *id == iid => turns.push(words(v["question"].as_str().unwrap())),
            _ => history.push((iid.clone(), vec![words(v["question"].as_str().unwrap())])),
        }
        let turns = &history.last().unwrap().1;
        let newest_first: Vec<&str> = turns.iter().rev().map(String::as_str).collect();
        out += &format!(
            "{iid}/{}\t{} {}\n",
            turns.len() - 1,
            newest_first.join(" | "),
            layout[v["db_id"].as_str().unwrap()]
        );
    }
    out
}

#[test]
fn vanilla_annotation_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    let args = ["annotate", "-c", &config(), "-o", &o, "--schema-marks", "off", "--structure-marks", "off", "--discourse", "off"];
    assert!(sqlmark(&args).status.success());
    let got = fs::read_to_string(dir.path().join("annotated.tsv")).unwrap();
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/annotated_vanilla.tsv");
    assert_eq!(got, fs::read_to_string(golden).unwrap());
    assert_eq!(got, vanilla_by_hand());
    // annotate stops before decoding
    assert!(!dir.path().join("decoded.sql").exists());
}

#[test]
fn marks_off_only_removes_marks() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().display().to_string();
    assert!(sqlmark(&["annotate", "-c", &config(), "-o", &o]).status.success());
    let marked = fs::read_to_string(dir.path().join("annotated.tsv")).unwrap();
    assert!(marked.contains("Exact-Match") && marked.contains("Primary-Key") && marked.contains("links to"));
    assert_ne!(marked, vanilla_by_hand());
}

#[test]
fn constraint_stops_hallucinated_columns() {
    let dir = tempfile::tempdir().unwrap();
    let violations = |constraint: &str| {
        let out = dir.path().join(constraint);
        let o = out.display().to_string();
        let r = sqlmark(&["run", "-c", &config(), "-o", &o, "--scorer", "adversarial", "--constraint", constraint]);
        assert!(r.status.success(), "{}", stderr(&r));
        report(&out)["errors"]["schema_violation"].as_u64().unwrap()
    };
    assert!(violations("off") > 0);
    assert_eq!(violations("on"), 0);
}

#[test]
fn missing_tables_fail_in_the_load_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("x").display().to_string();
    let r = sqlmark(&["run", "-c", &config(), "-o", &o, "--tables", "/nonexistent/tables.json"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("load stage"), "{}", stderr(&r));
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "scorer = \n").unwrap();
    let r = sqlmark(&["run", "-c", &bad.display().to_string()]);
    assert_eq!(r.status.code(), Some(2));

    fs::write(&bad, "scorer = \"telepathy\"\n").unwrap();
    assert_eq!(sqlmark(&["run", "-c", &bad.display().to_string()]).status.code(), Some(2));
    assert_eq!(sqlmark(&["run", "-c", &config(), "--scorer", "bogus"]).status.code(), Some(2));
    // an external scorer needs a vocabulary file
    assert_eq!(sqlmark(&["run", "-c", &config(), "--scorer", "extern:tcp:127.0.0.1:1"]).status.code(), Some(2));
}

#[test]
fn generated_corpus_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let c = corpus.display().to_string();
    let gen = ["gen", "--seed", "5", "--schemas", "5", "--queries", "50", "--max-turns", "3", "-o", &c];
    assert!(sqlmark(&gen).status.success());
    let again = dir.path().join("again");
    let mut gen2 = gen;
    let a = again.display().to_string();
    gen2[10] = &a;
    assert!(sqlmark(&gen2).status.success());
    assert_eq!(files(&corpus), files(&again));

    let out = dir.path().join("out").display().to_string();
    let r = sqlmark(&[
        "run",
        "--tables",
        &corpus.join("tables.json").display().to_string(),
        "--dataset",
        &corpus.join("examples.jsonl").display().to_string(),
        "-o",
        &out,
    ]);
    assert!(r.status.success(), "{}", stderr(&r));
    let r = report(Path::new(&out));
    assert_eq!(r["qm"].as_f64(), Some(1.0));
    assert_eq!(r["examples"].as_u64(), Some(50));
}

#[test]
fn complete_fills_in_the_join_path() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.sql");
    fs::write(
        &input,
        "SELECT Players.First_name FROM Players JOIN Ranking ORDER BY Ranking.Ranking_points DESC LIMIT 1\n\
         SELECT FROM\n\
         SELECT singer.Name FROM singer\tsinger\n",
    )
    .unwrap();
    let (out, plans) = (dir.path().join("out.sql"), dir.path().join("plans.jsonl"));
    let tables = common::fixtures().join("tables.json");
    let r = sqlmark(&[
        "complete",
        "--input",
        &input.display().to_string(),
        "--tables",
        &tables.display().to_string(),
        "--db",
        "wta_mini",
        "-o",
        &out.display().to_string(),
        "--plans",
        &plans.display().to_string(),
    ]);
    assert!(r.status.success(), "{}", stderr(&r));
    let lines: Vec<String> = fs::read_to_string(&out).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].contains("JOIN Matches ON"), "{}", lines[0]);
    assert_eq!(lines[1], "SELECT FROM");
    assert_eq!(lines[2], "SELECT singer.Name FROM singer");
    let plans: Vec<Value> =
        fs::read_to_string(&plans).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(plans[0]["plan"]["added_tables"], serde_json::json!(["Matches"]));
    assert!(plans[1]["plan"].is_null() && plans[1]["error"].is_string());
    assert_eq!(plans[2]["db_id"], "singer");
}

#[test]
fn evaluate_groups_by_interaction() {
    let dir = tempfile::tempdir().unwrap();
    let w = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p.display().to_string()
    };
    let pred = w("pred", "SELECT count(*) FROM singer\nSELECT singer.Nation FROM singer\nSELECT singer.Name FROM singer\n");
    let gold = w("gold", "SELECT count(*) FROM singer\tsinger\nSELECT Name FROM singer\tsinger\nSELECT Name FROM singer\tsinger\n");
    let ids = w("ids", "a\na\nb\n");
    let tables = common::fixtures().join("tables.json").display().to_string();
    let out = dir.path().join("ev");
    let o = out.display().to_string();
    let r = sqlmark(&["evaluate", "--pred", &pred, "--gold", &gold, "--tables", &tables, "--interactions", &ids, "-o", &o]);
    assert!(r.status.success(), "{}", stderr(&r));
    let rep = report(&out);
    assert_eq!(rep["qm"].as_f64(), Some(2.0 / 3.0));
    assert_eq!(rep["im"].as_f64(), Some(0.5));
    assert_eq!(rep["errors"]["schema_violation"].as_u64(), Some(1));
    assert!(out.join("summary.txt").exists());

    let short = w("short", "SELECT count(*) FROM singer\n");
    let r = sqlmark(&["evaluate", "--pred", &short, "--gold", &gold, "--tables", &tables]);
    assert!(!r.status.success());
}

/// Scores like the oracle, with the target looked up by example id.
struct KeyedOracle {
    targets: Arc<HashMap<String, Vec<TokenId>>>,
    eos: TokenId,
    size: usize,
}

impl TokenScorer for KeyedOracle {
    fn vocab_size(&self) -> usize {
        self.size
    }
    fn eos_id(&self) -> TokenId {
        self.eos
    }
    fn score(&mut self, ctx: &ScoreContext<'_>, prefix: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        let target = self.targets.get(ctx.example_id).ok_or_else(|| ScorerError::ProtocolViolation(format!("unknown example `{}`", ctx.example_id)))?;
        OracleScorer::new(target.clone(), self.eos, self.size).score(ctx, prefix, candidates)
    }
}

#[test]
fn endpoint_variable_overrides_the_configured_scorer() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann");
    assert!(sqlmark(&["annotate", "-c", &config(), "-o", &ann.display().to_string()]).status.success());
    let vocab_path = ann.join("vocab.txt");
    let vocab = Vocabulary::load(&vocab_path).unwrap();
    let ids = fs::read_to_string(ann.join("annotated.tsv")).unwrap();
    let sql = fs::read_to_string(ann.join("targets.sql")).unwrap();
    let targets: HashMap<String, Vec<TokenId>> = ids
        .lines()
        .zip(sql.lines())
        .map(|(a, s)| (a.split('\t').next().unwrap().to_string(), vocab.encode(s).unwrap()))
        .collect();
    let targets = Arc::new(targets);
    let (eos, size) = (vocab.eos(), vocab.len());

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let stream = stream.unwrap();
            stream.set_nodelay(true).unwrap();
            let mut scorer = KeyedOracle { targets: targets.clone(), eos, size };
            thread::spawn(move || {
                let reader = BufReader::new(stream.try_clone().unwrap());
                let _ = serve(&mut scorer, "word", reader, stream);
            });
        }
    });

    let v = vocab_path.display().to_string();
    let run = |env: &[(&str, &str)]| {
        let out = dir.path().join(format!("run{}", env.len()));
        let o = out.display().to_string();
        let r = sqlmark_env(&["run", "-c", &config(), "-o", &o, "--scorer", "extern:tcp:127.0.0.1:1", "--vocab", &v], env);
        (r, out)
    };
    // the configured endpoint is dead
    let (r, _) = run(&[]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("decode stage"), "{}", stderr(&r));

    let live = format!("tcp:{addr}");
    let (r, out) = run(&[(ENDPOINT_ENV, &live)]);
    assert!(r.status.success(), "{}", stderr(&r));
    let rep = report(&out);
    assert_eq!((rep["qm"].as_f64(), rep["im"].as_f64()), (Some(1.0), Some(1.0)));
}
