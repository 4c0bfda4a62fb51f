//! Lexicon-constrained beam decoding.
//!
//! A [`PrefixTrie`] over the scorer vocabulary spells every table, every
//! `Table.Column` and `*`. Outside identifier runs any keyword, number,
//! quote or EOS may follow; once a run starts it must follow the trie until
//! it reaches a complete name. Quoted literals suspend the trie unless value
//! mode puts stored values into it.

mod beam;
mod constraint;
pub mod remote;
mod scorer;
mod trie;
mod vocab;

use std::collections::HashSet;

pub use beam::{beam_search, BeamConfig, Hypothesis, LengthNorm};
pub use constraint::{AllowedTokens, Cursor, DecodeState, Lexicon};
pub use remote::RemoteScorer;
pub use scorer::{OracleScorer, RandomScorer, ScoreContext, ScorerError, ScriptedScorer, TokenScorer};
pub use trie::{PrefixTrie, SchemaItem};
pub use vocab::{detokenize, sql_surface_tokens, TokenId, Vocabulary, EOS, QUOTE, SQL_KEYWORDS};

use crate::schema::DatabaseSchema;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("`{0}` cannot be spelled with the vocabulary")]
    Untokenizable(String),
    #[error("every beam was pruned before reaching end of sequence")]
    NoValidHypothesis,
    #[error("invalid decoding configuration: {0}")]
    InvalidConfig(String),
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Maximal runs of name tokens outside quoted literals, detokenized.
///
/// A name token is anything that is not a keyword, number, quote or EOS,
/// so `Players . Name` is one run and `Players Name` is another.
pub fn identifier_runs(tokens: &[TokenId], vocab: &Vocabulary) -> Vec<String> {
    let mut runs = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut in_literal = false;
    for &t in tokens {
        let is_piece = !in_literal
            && t != vocab.quote()
            && t != vocab.eos()
            && !vocab.is_keyword(t)
            && !vocab.is_number(t);
        if is_piece {
            current.push(vocab.token(t));
        } else if !current.is_empty() {
            runs.push(detokenize(&current));
            current.clear();
        }
        if t == vocab.quote() {
            in_literal = !in_literal;
        }
    }
    if !current.is_empty() {
        runs.push(detokenize(&current));
    }
    runs
}

/// Names a decoded identifier run may spell: tables, `Table.Column`, `*`.
pub fn schema_names(schema: &DatabaseSchema) -> HashSet<String> {
    let mut names: HashSet<String> = schema.tables().iter().map(|t| t.name.clone()).collect();
    names.extend(schema.columns().map(|(id, _)| detokenize(&sql_surface_tokens(&schema.qualified_name(id)))));
    names.insert("*".to_string());
    names
}

/// Identifier runs in `tokens` that are not schema names.
pub fn schema_violations(tokens: &[TokenId], vocab: &Vocabulary, names: &HashSet<String>) -> Vec<String> {
    identifier_runs(tokens, vocab).into_iter().filter(|r| !names.contains(r)).collect()
}
