use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::MarkToggles;
use crate::decode::LengthNorm;
use crate::linking::{Language, DEFAULT_MAX_NGRAM};

use super::dataset::DatasetFormat;
use super::PipelineError;

/// Where decoding scores come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScorerSpec {
    /// Follows the gold query exactly.
    Oracle,
    /// Follows the SQL on line `i` of a file for the `i`-th question.
    OracleFile(PathBuf),
    /// Uniform random scores, seeded by the run seed and the example.
    Random,
    /// Prefers a plausible but non-existent column at every column slot and
    /// the gold token otherwise.
    Adversarial,
    /// A model behind the line protocol.
    External(String),
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Oracle => f.write_str("oracle"),
            ScorerSpec::OracleFile(p) => write!(f, "oracle:{}", p.display()),
            ScorerSpec::Random => f.write_str("random"),
            ScorerSpec::Adversarial => f.write_str("adversarial"),
            ScorerSpec::External(e) => write!(f, "extern:{e}"),
        }
    }
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "random" => Ok(Self::Random),
            "adversarial" => Ok(Self::Adversarial),
            _ => match (s.strip_prefix("extern:"), s.strip_prefix("oracle:")) {
                (Some(e), _) if !e.is_empty() => Ok(Self::External(e.to_string())),
                (_, Some(p)) if !p.is_empty() => Ok(Self::OracleFile(PathBuf::from(p))),
                _ => Err(format!("unknown scorer `{s}` (oracle, oracle:FILE, random, adversarial, extern:ENDPOINT)")),
            },
        }
    }
}

impl Serialize for ScorerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScorerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueConstraint {
    /// On for databases that carry cell values.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrevSqlSource {
    /// The pipeline's own output for the previous turn.
    #[default]
    Predicted,
    Gold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// `tables.json`, or a directory holding one.
    pub tables: PathBuf,
    /// Optional cell-value sidecar.
    pub content: Option<PathBuf>,
    pub dataset: PathBuf,
    pub dataset_format: DatasetFormat,
    pub output_dir: PathBuf,
    pub language: Language,
    pub max_ngram: usize,
    pub marks: MarkToggles,
    pub include_values: bool,
    pub prev_sql: PrevSqlSource,
    pub scorer: ScorerSpec,
    /// Decoder vocabulary, one token per line. Required for external
    /// scorers; built from the schemas and gold queries otherwise.
    pub vocab: Option<PathBuf>,
    pub scorer_timeout_ms: u64,
    pub beam_width: usize,
    pub max_len: usize,
    pub length_norm: LengthNorm,
    pub constrained: bool,
    pub value_constraint: ValueConstraint,
    pub completion: bool,
    pub seed: u64,
    /// Worker threads; `None` uses every processor.
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tables: PathBuf::from("tables.json"),
            content: None,
            dataset: PathBuf::from("examples.jsonl"),
            dataset_format: DatasetFormat::Auto,
            output_dir: PathBuf::from("out"),
            language: Language::En,
            max_ngram: DEFAULT_MAX_NGRAM,
            marks: MarkToggles::default(),
            include_values: true,
            prev_sql: PrevSqlSource::Predicted,
            scorer: ScorerSpec::Oracle,
            vocab: None,
            scorer_timeout_ms: 30_000,
            beam_width: 5,
            max_len: 200,
            length_norm: LengthNorm::Sum,
            constrained: true,
            value_constraint: ValueConstraint::Auto,
            completion: true,
            seed: 0,
            workers: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Relative paths in the file are taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.tables, &mut cfg.dataset, &mut cfg.output_dir] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            for p in [&mut cfg.content, &mut cfg.vocab].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            if let ScorerSpec::OracleFile(p) = &mut cfg.scorer {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.beam_width == 0 || self.max_len == 0 {
            return Err(PipelineError::Config("beam_width and max_len must be at least 1".into()));
        }
        if self.max_ngram == 0 {
            return Err(PipelineError::Config("max_ngram must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(PipelineError::Config("workers must be at least 1".into()));
        }
        if matches!(self.scorer, ScorerSpec::External(_)) && self.vocab.is_none() {
            return Err(PipelineError::Config("an external scorer needs `vocab`".into()));
        }
        Ok(())
    }
}
