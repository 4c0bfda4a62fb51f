use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::TokenId;
use crate::annotate::AnnotatedInput;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScorerError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("scorer did not answer within the timeout")]
    Timeout,
}

/// What the scorer is conditioned on for one decoding session.
#[derive(Clone, Copy, Debug)]
pub struct ScoreContext<'a> {
    pub example_id: &'a str,
    pub source: &'a AnnotatedInput,
}

/// The autoregressive model behind beam search.
///
/// `score` returns one log-score per candidate, in candidate order.
/// `f64::NEG_INFINITY` marks a token the model rules out; every other value
/// must be finite.
pub trait TokenScorer {
    fn vocab_size(&self) -> usize;
    fn eos_id(&self) -> TokenId;
    fn score(
        &mut self,
        ctx: &ScoreContext<'_>,
        prefix: &[TokenId],
        candidates: &[TokenId],
    ) -> Result<Vec<f64>, ScorerError>;
}

impl<T: TokenScorer + ?Sized> TokenScorer for Box<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn eos_id(&self) -> TokenId {
        (**self).eos_id()
    }
    fn score(&mut self, ctx: &ScoreContext<'_>, prefix: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        (**self).score(ctx, prefix, candidates)
    }
}

/// Puts all probability mass on the next token of a fixed target.
#[derive(Clone, Debug)]
pub struct OracleScorer {
    target: Vec<TokenId>,
    eos: TokenId,
    vocab_size: usize,
}

impl OracleScorer {
    pub fn new(target: Vec<TokenId>, eos: TokenId, vocab_size: usize) -> Self {
        Self { target, eos, vocab_size }
    }

    /// 1 for the gold continuation, 0 otherwise.
    pub fn probability(&self, prefix: &[TokenId], token: TokenId) -> f64 {
        let gold = self.target.get(prefix.len()).copied().unwrap_or(self.eos);
        if token == gold {
            1.0
        } else {
            0.0
        }
    }
}

impl TokenScorer for OracleScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    fn eos_id(&self) -> TokenId {
        self.eos
    }
    fn score(&mut self, _: &ScoreContext<'_>, prefix: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(candidates.iter().map(|&c| self.probability(prefix, c).ln()).collect())
    }
}

/// Per-position score tables with a default for unlisted tokens; after the
/// last table EOS scores 0 and everything else the default.
///
/// Useful for scripting a model that prefers a specific wrong token.
#[derive(Clone, Debug)]
pub struct ScriptedScorer {
    steps: Vec<HashMap<TokenId, f64>>,
    default: f64,
    eos: TokenId,
    vocab_size: usize,
}

impl ScriptedScorer {
    pub fn new(steps: Vec<HashMap<TokenId, f64>>, default: f64, eos: TokenId, vocab_size: usize) -> Self {
        Self { steps, default, eos, vocab_size }
    }

    /// Target tokens score 0, everything else `default`.
    pub fn soft_target(target: &[TokenId], default: f64, eos: TokenId, vocab_size: usize) -> Self {
        Self::new(target.iter().map(|&t| HashMap::from([(t, 0.0)])).collect(), default, eos, vocab_size)
    }

    pub fn prefer_at(&mut self, position: usize, token: TokenId, score: f64) {
        self.steps[position].insert(token, score);
    }
}

impl TokenScorer for ScriptedScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    fn eos_id(&self) -> TokenId {
        self.eos
    }
    fn score(&mut self, _: &ScoreContext<'_>, prefix: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(candidates
            .iter()
            .map(|c| match self.steps.get(prefix.len()) {
                Some(table) => table.get(c).copied().unwrap_or(self.default),
                None if *c == self.eos => 0.0,
                None => self.default,
            })
            .collect())
    }
}

/// Uniform random log-scores in `[-5, 0)`, seeded per scorer.
#[derive(Clone, Debug)]
pub struct RandomScorer {
    rng: ChaCha8Rng,
    eos: TokenId,
    vocab_size: usize,
    eos_bias: f64,
}

impl RandomScorer {
    pub fn new(seed: u64, eos: TokenId, vocab_size: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), eos, vocab_size, eos_bias: 0.0 }
    }

    /// Added to the EOS score; negative values give longer outputs.
    pub fn with_eos_bias(mut self, bias: f64) -> Self {
        self.eos_bias = bias;
        self
    }
}

impl TokenScorer for RandomScorer {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    fn eos_id(&self) -> TokenId {
        self.eos
    }
    fn score(&mut self, _: &ScoreContext<'_>, _: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, ScorerError> {
        Ok(candidates
            .iter()
            .map(|&c| {
                let s = -self.rng.gen_range(0.0..5.0);
                if c == self.eos {
                    s + self.eos_bias
                } else {
                    s
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_past_the_end() {
        let o = OracleScorer::new(vec![5, 6], 0, 10);
        assert_eq!(o.probability(&[5], 6), 1.0);
        assert_eq!(o.probability(&[5], 5), 0.0);
        assert_eq!(o.probability(&[5, 6, 7], 0), 1.0);
        assert_eq!(o.probability(&[5, 6, 7], 6), 0.0);
    }

    #[test]
    fn random_is_seeded() {
        let input = AnnotatedInput::new();
        let ctx = ScoreContext { example_id: "x", source: &input };
        let a = RandomScorer::new(3, 0, 10).score(&ctx, &[], &[1, 2, 3]).unwrap();
        let b = RandomScorer::new(3, 0, 10).score(&ctx, &[], &[1, 2, 3]).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.is_finite() && *s <= 0.0));
    }
}
