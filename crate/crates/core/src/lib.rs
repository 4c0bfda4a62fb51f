//! Structure-aware text-to-SQL toolkit.
//!
//! The crate wraps an autoregressive scorer (anything implementing
//! [`decode::TokenScorer`]) with three model-agnostic extensions:
//!
//! * **structure marks** ([`annotate`]): the question, the linearized schema,
//!   schema-linking results, key/type properties, table relations and the
//!   previous turn's SQL are serialized into one marked token sequence;
//! * **constrained decoding** ([`decode`]): a prefix trie over schema surface
//!   forms filters illegal tokens at every beam-search step;
//! * **SQL completion** ([`complete`]): missing `FROM`/`JOIN` tables and join
//!   keys are recovered from shortest paths in the schema graph.
//!
//! Supporting modules load Spider-format schemas ([`schema`]), align question
//! n-grams with schema items ([`linking`]), parse and canonicalize SQL
//! ([`sql`]), compute LX/EM/QM/IM ([`eval`]) and drive the whole thing end to
//! end ([`pipeline`]).

pub mod annotate;
pub mod complete;
pub mod decode;
pub mod eval;
pub mod linking;
pub mod pipeline;
pub mod schema;
pub mod sql;

pub use annotate::{AnnotatedInput, Mark, MarkToggles, Segment};
pub use complete::{complete_sql, connect_terminals, CompletionPlan};
pub use decode::{beam_search, BeamConfig, PrefixTrie, TokenScorer, Vocabulary};
pub use eval::{score_corpus, EvaluationReport};
pub use linking::{LinkAnnotation, MatchKind, QuestionTokens};
pub use schema::{DatabaseSchema, SchemaGraph};
pub use sql::{parse_sql, render_sql, SqlQuery};
