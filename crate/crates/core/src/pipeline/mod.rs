//! End-to-end driver: load → link → annotate → decode → complete →
//! evaluate, with every stage written to its own file.
//!
//! Output directory layout:
//!
//! | file | one line per question |
//! |---|---|
//! | `config.toml` | the resolved configuration (not per question) |
//! | `vocab.txt` | decoder vocabulary, line number = token id |
//! | `links.jsonl` | `{example_id, db_id, links: [...]}` |
//! | `annotated.tsv` | `example_id<TAB>structure-marked input` |
//! | `targets.sql` | canonical gold SQL |
//! | `pairs.txt` | two lines per question: the input, then the target |
//! | `decoded.sql` | best beam hypothesis, empty when decoding failed |
//! | `completed.sql` | decoded SQL after JOIN completion |
//! | `plans.jsonl` | completion plan per question |
//! | `report.json`, `summary.txt` | metrics |

mod config;
mod dataset;
mod run;
pub mod synth;

pub use config::{PipelineConfig, PrevSqlSource, ScorerSpec, ValueConstraint};
pub use dataset::{load_dataset, write_jsonl, DatasetFormat, Interaction, QuestionRecord, Turn};
pub use run::{
    hallucinated_name, load_schemas, run_pipeline, run_stages, ExampleOutcome, RunOutput, Stage,
};
pub use synth::{generate, generate_synthetic_corpus, SynthOptions, SyntheticCorpus};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage} stage: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    pub(crate) fn at(stage: Stage, message: impl std::fmt::Display) -> Self {
        Self::Stage { stage, message: message.to_string() }
    }

    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Stage { .. } => 1,
        }
    }
}
