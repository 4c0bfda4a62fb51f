use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{PipelineConfig, PrevSqlSource, ScorerSpec, ValueConstraint};
use super::dataset::{load_dataset, Interaction};
use super::PipelineError;
use crate::annotate::{build_input, AnnotateOptions, AnnotatedInput};
use crate::complete::{complete_sql, CompletionPlan};
use crate::decode::{
    beam_search, sql_surface_tokens, BeamConfig, DecodeError, Lexicon, OracleScorer, PrefixTrie, RandomScorer,
    RemoteScorer, ScoreContext, ScriptedScorer, TokenId, TokenScorer, Vocabulary,
};
use crate::eval::{score_corpus, EvalExample, EvaluationReport};
use crate::linking::{link_all, LinkAnnotation, QuestionTokens};
use crate::schema::{attach_content, load_content_file, load_tables_file, ColumnId, DatabaseSchema, SchemaGraph};
use crate::sql::{parse_sql, render_sql, SqlQuery};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Link,
    Annotate,
    Decode,
    Complete,
    Evaluate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::Link => "link",
            Stage::Annotate => "annotate",
            Stage::Decode => "decode",
            Stage::Complete => "complete",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        })
    }
}

pub fn load_schemas(tables: &Path, content: Option<&Path>) -> Result<Vec<DatabaseSchema>, PipelineError> {
    let mut schemas = load_tables_file(tables).map_err(|e| PipelineError::at(Stage::Load, e))?;
    if let Some(c) = content {
        let sidecar = load_content_file(c).map_err(|e| PipelineError::at(Stage::Load, e))?;
        for s in &mut schemas {
            attach_content(s, &sidecar).map_err(|e| PipelineError::at(Stage::Load, e))?;
        }
    }
    Ok(schemas)
}

const SYNONYMS: &[(&str, &str)] = &[("citizenship", "Nation"), ("nationality", "Nation"), ("country", "Nation")];

/// A plausible column name the table does not have, used by the
/// adversarial scorer.
pub fn hallucinated_name(schema: &DatabaseSchema, column: ColumnId) -> String {
    let real = &schema.column(column).name;
    let mut name = SYNONYMS
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(real))
        .map(|(_, v)| v.to_string())
        .unwrap_or_else(|| format!("{real}_name"));
    while schema.column_index(column.table, &name).is_some() {
        name.push('x');
    }
    name
}

struct Database {
    schema: DatabaseSchema,
    graph: SchemaGraph,
    trie: PrefixTrie,
    value_mode: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleOutcome {
    pub example_id: String,
    pub db_id: String,
    pub interaction_id: String,
    pub links: Vec<LinkAnnotation>,
    #[serde(skip)]
    pub input: AnnotatedInput,
    pub target: String,
    pub decoded: Option<String>,
    pub decode_error: Option<String>,
    pub completed: Option<String>,
    pub plan: Option<CompletionPlan>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub outcomes: Vec<ExampleOutcome>,
    pub report: Option<EvaluationReport>,
    pub output_dir: PathBuf,
}

fn fnv(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Column slots in a target: the token after `Table .` outside literals.
fn column_slots(target: &[TokenId], vocab: &Vocabulary, schema: &DatabaseSchema) -> Vec<(usize, ColumnId)> {
    let dot = vocab.id(".");
    let mut in_literal = false;
    let mut out = Vec::new();
    for i in 0..target.len() {
        if target[i] == vocab.quote() {
            in_literal = !in_literal;
            continue;
        }
        if in_literal || i < 2 || Some(target[i - 1]) != dot {
            continue;
        }
        let table = vocab.token(target[i - 2]);
        if let Some(t) = schema.table_index(table) {
            if let Some(c) = schema.column_index(t, vocab.token(target[i])) {
                out.push((i, c));
            }
        }
    }
    out
}

struct Run<'a> {
    config: &'a PipelineConfig,
    dbs: HashMap<String, Database>,
    vocab: Vocabulary,
    until: Stage,
    /// Canonical SQL per question for `oracle:FILE`.
    oracle_lines: Vec<String>,
}

impl Run<'_> {
    fn scorer(&self, example_id: &str, target: &[TokenId], db: &Database) -> Result<Box<dyn TokenScorer>, PipelineError> {
        let v = &self.vocab;
        Ok(match &self.config.scorer {
            ScorerSpec::Oracle | ScorerSpec::OracleFile(_) => {
                Box::new(OracleScorer::new(target.to_vec(), v.eos(), v.len()))
            }
            ScorerSpec::Random => {
                Box::new(RandomScorer::new(self.config.seed ^ fnv(example_id), v.eos(), v.len()).with_eos_bias(-1.0))
            }
            ScorerSpec::Adversarial => {
                let mut s = ScriptedScorer::soft_target(target, -20.0, v.eos(), v.len());
                for (pos, col) in column_slots(target, v, &db.schema) {
                    let fake = hallucinated_name(&db.schema, col);
                    let fake = v.id(&fake).expect("hallucinations are in the vocabulary");
                    s.prefer_at(pos, fake, 0.0);
                    s.prefer_at(pos, target[pos], -1.0);
                }
                Box::new(s)
            }
            ScorerSpec::External(endpoint) => {
                let endpoint = std::env::var(super::super::decode::remote::ENDPOINT_ENV).unwrap_or(endpoint.clone());
                let r = RemoteScorer::connect(&endpoint, Duration::from_millis(self.config.scorer_timeout_ms))
                    .map_err(|e| PipelineError::at(Stage::Decode, e))?;
                r.check_vocabulary(v).map_err(|e| PipelineError::at(Stage::Decode, e))?;
                Box::new(r)
            }
        })
    }

    /// `offset` is the dataset-wide index of the interaction's first question.
    fn interaction(&self, it: &Interaction, offset: usize) -> Result<Vec<ExampleOutcome>, PipelineError> {
        let cfg = self.config;
        let db = self
            .dbs
            .get(&it.db_id)
            .ok_or_else(|| PipelineError::at(Stage::Load, format!("unknown database `{}`", it.db_id)))?;
        let schema = &db.schema;
        let mut out = Vec::with_capacity(it.turns.len());
        let mut prev: Option<SqlQuery> = None;
        let mut scorer: Option<Box<dyn TokenScorer>> = None;
        let mut texts: Vec<&str> = Vec::new();
        for (k, turn) in it.turns.iter().enumerate() {
            let example_id = format!("{}/{k}", it.id);
            texts.push(&turn.question);
            let question = QuestionTokens::from_texts(&texts, cfg.language)
                .map_err(|e| PipelineError::at(Stage::Link, format!("{example_id}: {e}")))?;
            let gold = match parse_sql(&turn.query, Some(schema)) {
                Ok(g) => g,
                Err(e) => {
                    warn!("{example_id}: skipped, gold query does not parse: {e}");
                    prev = None;
                    continue;
                }
            };
            let target = render_sql(&gold);
            let links = link_all(&question, schema, cfg.max_ngram);
            let mut outcome = ExampleOutcome {
                example_id: example_id.clone(),
                db_id: it.db_id.clone(),
                interaction_id: it.id.clone(),
                links,
                input: AnnotatedInput::new(),
                target: target.clone(),
                decoded: None,
                decode_error: None,
                completed: None,
                plan: None,
            };
            if self.until >= Stage::Annotate {
                let options = AnnotateOptions { toggles: cfg.marks, include_values: cfg.include_values };
                outcome.input = build_input(&question, schema, &outcome.links, prev.as_ref(), &options)
                    .map_err(|e| PipelineError::at(Stage::Annotate, format!("{example_id}: {e}")))?;
            }
            if self.until >= Stage::Decode {
                let oracle = match cfg.scorer {
                    ScorerSpec::OracleFile(_) => &self.oracle_lines[offset + k],
                    _ => &target,
                };
                let target_ids = match cfg.scorer {
                    ScorerSpec::External(_) => Vec::new(),
                    _ => self
                        .vocab
                        .encode(oracle)
                        .map_err(|e| PipelineError::at(Stage::Decode, format!("{example_id}: {e}")))?,
                };
                let scorer = match (&cfg.scorer, &mut scorer) {
                    (ScorerSpec::External(_), Some(s)) => s,
                    (_, slot) => slot.insert(self.scorer(&example_id, &target_ids, db)?),
                };
                let lexicon = Lexicon::new(&db.trie, &self.vocab, db.value_mode);
                let beam = BeamConfig {
                    width: cfg.beam_width,
                    max_len: cfg.max_len,
                    constrained: cfg.constrained,
                    length_norm: cfg.length_norm,
                };
                let ctx = ScoreContext { example_id: &example_id, source: &outcome.input };
                match beam_search(scorer.as_mut(), &ctx, &lexicon, &beam) {
                    Ok(hyps) => outcome.decoded = Some(self.vocab.decode(&hyps[0].tokens)),
                    Err(e @ DecodeError::NoValidHypothesis) => {
                        warn!("{example_id}: {e}");
                        outcome.decode_error = Some(e.to_string());
                    }
                    Err(e) => return Err(PipelineError::at(Stage::Decode, format!("{example_id}: {e}"))),
                }
            }
            let mut predicted: Option<SqlQuery> = None;
            if self.until >= Stage::Complete {
                let decoded = outcome.decoded.clone().unwrap_or_default();
                let parsed = parse_sql(&decoded, Some(schema)).ok();
                let (completed, plan) = match (&parsed, cfg.completion) {
                    (Some(q), true) => match complete_sql(q, schema, &db.graph) {
                        Ok((done, plan)) => (render_sql(&done), Some(plan)),
                        Err(e) => {
                            warn!("{example_id}: completion failed: {e}");
                            (decoded.clone(), None)
                        }
                    },
                    _ => (decoded.clone(), None),
                };
                predicted = parse_sql(&completed, Some(schema)).ok();
                outcome.completed = Some(completed);
                outcome.plan = plan;
            }
            prev = match cfg.prev_sql {
                PrevSqlSource::Gold => Some(gold),
                PrevSqlSource::Predicted => predicted,
            };
            out.push(outcome);
        }
        Ok(out)
    }
}

fn write_lines(dir: &Path, name: &str, lines: impl Iterator<Item = String>) -> Result<(), PipelineError> {
    let path = dir.join(name);
    let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(|e| PipelineError::at(Stage::Write, format!("{}: {e}", path.display())))?);
    for l in lines {
        writeln!(f, "{l}").map_err(|e| PipelineError::at(Stage::Write, e))?;
    }
    f.flush().map_err(|e| PipelineError::at(Stage::Write, e))
}

/// Runs every stage and evaluates.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    run_stages(config, Stage::Evaluate)
}

/// Runs the stages up to and including `until` and writes their files.
pub fn run_stages(config: &PipelineConfig, until: Stage) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let schemas = load_schemas(&config.tables, config.content.as_deref())?;
    let interactions = load_dataset(&config.dataset, config.dataset_format)
        .map_err(|e| PipelineError::at(Stage::Load, e))?;
    info!("{} databases, {} interactions", schemas.len(), interactions.len());
    let by_id: HashMap<&str, &DatabaseSchema> = schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let canonical = |db_id: &str, sql: &str| {
        by_id
            .get(db_id)
            .and_then(|s| parse_sql(sql, Some(s)).ok())
            .map(|q| render_sql(&q))
            .unwrap_or_else(|| sql.to_string())
    };
    let questions: Vec<(&str, &str)> =
        interactions.iter().flat_map(|it| it.turns.iter().map(|t| (it.db_id.as_str(), t.query.as_str()))).collect();
    let oracle_lines: Vec<String> = match &config.scorer {
        ScorerSpec::OracleFile(p) => {
            let text = fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
            let lines: Vec<&str> = text.lines().collect();
            if lines.len() != questions.len() {
                return Err(PipelineError::Config(format!(
                    "{}: {} lines for {} questions",
                    p.display(),
                    lines.len(),
                    questions.len()
                )));
            }
            lines.iter().zip(&questions).map(|(l, (db, _))| canonical(db, l)).collect()
        }
        _ => Vec::new(),
    };

    let vocab = match &config.vocab {
        Some(p) => Vocabulary::load(p).map_err(|e| PipelineError::at(Stage::Load, e))?,
        None => {
            let mut v = Vocabulary::new();
            for s in &schemas {
                v.add_schema(s);
                if config.scorer == ScorerSpec::Adversarial {
                    for (id, _) in s.columns() {
                        v.add(&hallucinated_name(s, id));
                    }
                }
            }
            for (db, sql) in &questions {
                for tok in sql_surface_tokens(&canonical(db, sql)) {
                    v.add(&tok);
                }
            }
            for line in &oracle_lines {
                for tok in sql_surface_tokens(line) {
                    v.add(&tok);
                }
            }
            v
        }
    };

    drop(by_id);
    let mut dbs = HashMap::new();
    for schema in schemas {
        let value_mode = match config.value_constraint {
            ValueConstraint::Auto => schema.has_content(),
            ValueConstraint::On => true,
            ValueConstraint::Off => false,
        };
        let trie = PrefixTrie::build(&schema, &vocab, value_mode)
            .map_err(|e| PipelineError::at(Stage::Load, format!("{}: {e}", schema.db_id)))?;
        let graph = SchemaGraph::build(&schema);
        dbs.insert(schema.db_id.clone(), Database { schema, graph, trie, value_mode });
    }
    let run = Run { config, dbs, vocab, until, oracle_lines };
    let offsets: Vec<usize> = interactions
        .iter()
        .scan(0, |acc, it| {
            let o = *acc;
            *acc += it.turns.len();
            Some(o)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let per_interaction: Vec<Vec<ExampleOutcome>> =
        pool.install(|| {
            interactions.par_iter().zip(&offsets).map(|(it, &o)| run.interaction(it, o)).collect::<Result<_, _>>()
        })?;
    let outcomes: Vec<ExampleOutcome> = per_interaction.into_iter().flatten().collect();

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| PipelineError::at(Stage::Write, format!("{}: {e}", dir.display())))?;
    fs::write(dir.join("config.toml"), config.to_toml()).map_err(|e| PipelineError::at(Stage::Write, e))?;
    run.vocab.save(dir.join("vocab.txt")).map_err(|e| PipelineError::at(Stage::Write, e))?;
    write_lines(
        dir,
        "links.jsonl",
        outcomes.iter().map(|o| {
            let schema = &run.dbs[&o.db_id].schema;
            let links: Vec<_> = o
                .links
                .iter()
                .map(|l| json!({"span": [l.span.start, l.span.end], "kind": l.kind.mark(), "target": l.target.describe(schema)}))
                .collect();
            json!({"example_id": o.example_id, "db_id": o.db_id, "links": links}).to_string()
        }),
    )?;
    if until >= Stage::Annotate {
        write_lines(dir, "annotated.tsv", outcomes.iter().map(|o| format!("{}\t{}", o.example_id, o.input.render())))?;
        write_lines(dir, "targets.sql", outcomes.iter().map(|o| o.target.clone()))?;
        write_lines(dir, "pairs.txt", outcomes.iter().flat_map(|o| [o.input.render(), o.target.clone()]))?;
    }
    if until >= Stage::Decode {
        write_lines(dir, "decoded.sql", outcomes.iter().map(|o| o.decoded.clone().unwrap_or_default()))?;
    }
    if until >= Stage::Complete {
        write_lines(dir, "completed.sql", outcomes.iter().map(|o| o.completed.clone().unwrap_or_default()))?;
        write_lines(
            dir,
            "plans.jsonl",
            outcomes.iter().map(|o| json!({"example_id": o.example_id, "plan": o.plan}).to_string()),
        )?;
    }
    let mut report = None;
    if until >= Stage::Evaluate {
        let examples: Vec<EvalExample> = outcomes
            .iter()
            .map(|o| EvalExample {
                prediction: o.completed.clone().unwrap_or_default(),
                gold: o.target.clone(),
                db_id: o.db_id.clone(),
                interaction_id: o.interaction_id.clone(),
            })
            .collect();
        let by_id: BTreeMap<&str, &DatabaseSchema> = run.dbs.iter().map(|(k, d)| (k.as_str(), &d.schema)).collect();
        let r = score_corpus(&examples, |id| by_id.get(id).copied()).map_err(|e| PipelineError::at(Stage::Evaluate, e))?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&r).expect("report serializes") + "\n")
            .map_err(|e| PipelineError::at(Stage::Write, e))?;
        fs::write(dir.join("summary.txt"), r.summary()).map_err(|e| PipelineError::at(Stage::Write, e))?;
        report = Some(r);
    }
    Ok(RunOutput { outcomes, report, output_dir: dir.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::wta;

    #[test]
    fn hallucinations_avoid_real_columns() {
        let s = wta();
        for (id, _) in s.columns() {
            let fake = hallucinated_name(&s, id);
            assert!(s.column_index(id.table, &fake).is_none());
        }
    }

    #[test]
    fn slots_skip_literals() {
        let s = wta();
        let mut v = Vocabulary::new();
        v.add_schema(&s);
        v.add_text("'Players . First_name'");
        let t = v.encode("SELECT Players.First_name FROM Players WHERE Players.Player_id = 'Players . First_name'").unwrap();
        let slots = column_slots(&t, &v, &s);
        assert_eq!(slots.iter().map(|(_, c)| *c).collect::<Vec<_>>(), vec![ColumnId::new(0, 1), ColumnId::new(0, 0)]);
    }
}
