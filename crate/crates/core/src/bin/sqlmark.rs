//! Command-line driver. Every subcommand reads and writes plain files; see
//! the `pipeline` module docs for the output layout.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;
use serde_json::json;

use sqlmark::complete::complete_sql;
use sqlmark::decode::LengthNorm;
use sqlmark::eval::{pair_up, score_corpus};
use sqlmark::linking::Language;
use sqlmark::pipeline::{
    generate, load_schemas, run_stages, DatasetFormat, PipelineConfig, PipelineError, PrevSqlSource, ScorerSpec,
    Stage, SynthOptions, ValueConstraint,
};
use sqlmark::schema::{DatabaseSchema, SchemaGraph};
use sqlmark::{parse_sql, render_sql};

#[derive(Parser)]
#[command(name = "sqlmark", version, about = "Schema-marked text-to-SQL pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Link question spans to tables, columns and values.
    Link(PipelineArgs),
    /// Write structure-marked inputs and target SQL.
    Annotate(PipelineArgs),
    /// Decode with a scorer under the schema constraint.
    Decode {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        decode: DecodeArgs,
    },
    /// Add missing JOIN tables and keys to SQL lines.
    Complete(CompleteArgs),
    /// Score predictions against gold SQL.
    Evaluate(EvaluateArgs),
    /// Every stage from loading to evaluation.
    Run {
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        decode: DecodeArgs,
        #[arg(long)]
        completion: Option<Switch>,
    },
    /// Write a random corpus: tables.json and examples.jsonl.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Sum,
    Mean,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML configuration; flags override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// tables.json or a directory holding one.
    #[arg(long)]
    tables: Option<PathBuf>,
    /// Cell-value sidecar keyed by database id.
    #[arg(long)]
    content: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<DatasetFormatArg>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    language: Option<LanguageArg>,
    #[arg(long)]
    max_ngram: Option<usize>,
    #[arg(long)]
    schema_marks: Option<Switch>,
    #[arg(long)]
    structure_marks: Option<Switch>,
    #[arg(long)]
    discourse: Option<Switch>,
    /// Serialize sample cell values after their columns.
    #[arg(long)]
    values: Option<Switch>,
    /// Feed the gold previous query instead of the predicted one.
    #[arg(long)]
    gold_prev_sql: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetFormatArg {
    Auto,
    Jsonl,
    Spider,
    Sparc,
}

#[derive(Clone, Copy, ValueEnum)]
enum LanguageArg {
    En,
    Zh,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// oracle, oracle:FILE, random, adversarial or extern:ENDPOINT.
    /// SQLMARK_SCORER_ENDPOINT overrides the endpoint of an external scorer.
    #[arg(long)]
    scorer: Option<ScorerSpec>,
    /// Decoder vocabulary, one token per line.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    constraint: Option<Switch>,
    /// Restrict quoted literals to known cell values.
    #[arg(long, value_enum)]
    value_constraint: Option<ValueConstraintArg>,
    #[arg(long, value_enum)]
    length_norm: Option<Norm>,
    #[arg(long)]
    timeout_ms: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValueConstraintArg {
    Auto,
    On,
    Off,
}

#[derive(Args)]
struct CompleteArgs {
    /// One query per line, optionally followed by a tab and the database id.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    tables: PathBuf,
    /// Database for lines without one.
    #[arg(long)]
    db: Option<String>,
    /// Completed SQL, one line per input line.
    #[arg(long, short)]
    out: PathBuf,
    /// Completion plans, one JSON record per input line.
    #[arg(long)]
    plans: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// One predicted query per line.
    #[arg(long)]
    pred: PathBuf,
    /// One `SQL<TAB>db_id` per line.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    tables: PathBuf,
    /// One interaction id per line; without it every line is its own
    /// interaction.
    #[arg(long)]
    interactions: Option<PathBuf>,
    /// Directory for report.json and summary.txt.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    schemas: usize,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 1)]
    max_turns: usize,
    #[arg(long, short)]
    out: PathBuf,
}

fn config_error(msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Config(msg.to_string())
}

fn stage_error(stage: Stage, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage { stage, message: msg.to_string() }
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = &self.tables {
            cfg.tables = p.clone();
        }
        if let Some(p) = &self.content {
            cfg.content = Some(p.clone());
        }
        if let Some(p) = &self.dataset {
            cfg.dataset = p.clone();
        }
        if let Some(f) = self.format {
            cfg.dataset_format = match f {
                DatasetFormatArg::Auto => DatasetFormat::Auto,
                DatasetFormatArg::Jsonl => DatasetFormat::Jsonl,
                DatasetFormatArg::Spider => DatasetFormat::Spider,
                DatasetFormatArg::Sparc => DatasetFormat::Sparc,
            };
        }
        if let Some(p) = &self.out {
            cfg.output_dir = p.clone();
        }
        if let Some(l) = self.language {
            cfg.language = match l {
                LanguageArg::En => Language::En,
                LanguageArg::Zh => Language::Zh,
            };
        }
        if let Some(n) = self.max_ngram {
            cfg.max_ngram = n;
        }
        if let Some(s) = self.schema_marks {
            cfg.marks.schema_property = s.on();
        }
        if let Some(s) = self.structure_marks {
            cfg.marks.database_structure = s.on();
        }
        if let Some(s) = self.discourse {
            cfg.marks.discourse = s.on();
        }
        if let Some(s) = self.values {
            cfg.include_values = s.on();
        }
        if self.gold_prev_sql {
            cfg.prev_sql = PrevSqlSource::Gold;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        Ok(cfg)
    }
}

impl DecodeArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(b) = self.beam {
            cfg.beam_width = b;
        }
        if let Some(m) = self.max_len {
            cfg.max_len = m;
        }
        if let Some(s) = &self.scorer {
            cfg.scorer = s.clone();
        }
        if let Some(v) = &self.vocab {
            cfg.vocab = Some(v.clone());
        }
        if let Some(c) = self.constraint {
            cfg.constrained = c.on();
        }
        if let Some(v) = self.value_constraint {
            cfg.value_constraint = match v {
                ValueConstraintArg::Auto => ValueConstraint::Auto,
                ValueConstraintArg::On => ValueConstraint::On,
                ValueConstraintArg::Off => ValueConstraint::Off,
            };
        }
        if let Some(n) = self.length_norm {
            cfg.length_norm = match n {
                Norm::Sum => LengthNorm::Sum,
                Norm::Mean => LengthNorm::Mean,
            };
        }
        if let Some(t) = self.timeout_ms {
            cfg.scorer_timeout_ms = t;
        }
    }
}

fn stages(cfg: &PipelineConfig, until: Stage) -> Result<(), PipelineError> {
    let out = run_stages(cfg, until)?;
    eprintln!("{} questions -> {}", out.outcomes.len(), out.output_dir.display());
    if let Some(r) = out.report {
        print!("{}", r.summary());
    }
    Ok(())
}

fn schema_map(tables: &Path) -> Result<HashMap<String, DatabaseSchema>, PipelineError> {
    Ok(load_schemas(tables, None)?.into_iter().map(|s| (s.db_id.clone(), s)).collect())
}

fn read_lines(path: &Path) -> Result<Vec<String>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| stage_error(Stage::Load, format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| stage_error(Stage::Write, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| stage_error(Stage::Write, format!("{}: {e}", path.display())))
}

fn complete(args: &CompleteArgs) -> Result<(), PipelineError> {
    let schemas = schema_map(&args.tables)?;
    let graphs: HashMap<&str, SchemaGraph> = schemas.iter().map(|(k, s)| (k.as_str(), SchemaGraph::build(s))).collect();
    let mut sql_out = String::new();
    let mut plans_out = String::new();
    for (i, line) in read_lines(&args.input)?.iter().enumerate() {
        let (sql, db) = match line.split_once('\t') {
            Some((q, d)) => (q, Some(d.trim())),
            None => (line.as_str(), args.db.as_deref()),
        };
        let db = db.ok_or_else(|| config_error(format!("line {}: no database id and no --db", i + 1)))?;
        let schema = schemas
            .get(db)
            .ok_or_else(|| stage_error(Stage::Complete, format!("line {}: unknown database `{db}`", i + 1)))?;
        let result = parse_sql(sql, Some(schema))
            .map_err(|e| e.to_string())
            .and_then(|q| complete_sql(&q, schema, &graphs[db]).map_err(|e| e.to_string()));
        let record = match result {
            Ok((done, plan)) => {
                sql_out.push_str(&render_sql(&done));
                json!({"line": i + 1, "db_id": db, "plan": plan})
            }
            Err(e) => {
                warn!("line {}: left unchanged: {e}", i + 1);
                sql_out.push_str(sql);
                json!({"line": i + 1, "db_id": db, "plan": null, "error": e})
            }
        };
        sql_out.push('\n');
        plans_out.push_str(&record.to_string());
        plans_out.push('\n');
    }
    write_file(&args.out, &sql_out)?;
    if let Some(p) = &args.plans {
        write_file(p, &plans_out)?;
    }
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<(), PipelineError> {
    let schemas = schema_map(&args.tables)?;
    let preds = read_lines(&args.pred)?;
    let gold_lines = read_lines(&args.gold)?;
    let ids = match &args.interactions {
        Some(p) => read_lines(p)?,
        None => (0..gold_lines.len()).map(|i| i.to_string()).collect(),
    };
    if ids.len() != gold_lines.len() {
        return Err(config_error(format!("{} interaction ids for {} gold queries", ids.len(), gold_lines.len())));
    }
    let mut golds = Vec::with_capacity(gold_lines.len());
    for (i, (line, iid)) in gold_lines.iter().zip(ids).enumerate() {
        let (sql, db) = line
            .rsplit_once('\t')
            .ok_or_else(|| config_error(format!("{}:{}: expected `SQL<TAB>db_id`", args.gold.display(), i + 1)))?;
        golds.push((sql.to_string(), db.trim().to_string(), iid));
    }
    let examples = pair_up(&preds, &golds).map_err(config_error)?;
    let report = score_corpus(&examples, |id| schemas.get(id)).map_err(|e| stage_error(Stage::Evaluate, e))?;
    if let Some(dir) = &args.out {
        write_file(&dir.join("report.json"), &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
        write_file(&dir.join("summary.txt"), &report.summary())?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn gen(args: &GenArgs) -> Result<(), PipelineError> {
    if args.schemas == 0 || args.queries == 0 || args.max_turns == 0 {
        return Err(config_error("--schemas, --queries and --max-turns must be at least 1"));
    }
    let corpus = generate(&SynthOptions {
        seed: args.seed,
        n_schemas: args.schemas,
        n_queries: args.queries,
        max_turns: args.max_turns,
    });
    corpus.write(&args.out).map_err(|e| stage_error(Stage::Write, format!("{}: {e}", args.out.display())))?;
    eprintln!(
        "{} schemas, {} interactions -> {}",
        corpus.schemas.len(),
        corpus.interactions.len(),
        args.out.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Link(p) => stages(&p.config()?, Stage::Link),
        Command::Annotate(p) => stages(&p.config()?, Stage::Annotate),
        Command::Decode { pipeline, decode } => {
            let mut cfg = pipeline.config()?;
            decode.apply(&mut cfg);
            stages(&cfg, Stage::Decode)
        }
        Command::Complete(a) => complete(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Run { pipeline, decode, completion } => {
            let mut cfg = pipeline.config()?;
            decode.apply(&mut cfg);
            if let Some(c) = completion {
                cfg.completion = c.on();
            }
            stages(&cfg, Stage::Evaluate)
        }
        Command::Gen(a) => gen(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
