use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::constraint::{AllowedTokens, Cursor, DecodeState, Lexicon};
use super::scorer::{ScoreContext, ScorerError, TokenScorer};
use super::vocab::TokenId;
use super::DecodeError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthNorm {
    /// Total log-score.
    #[default]
    Sum,
    /// Total divided by the number of emitted tokens, EOS included.
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub width: usize,
    /// Longest output, EOS excluded.
    pub max_len: usize,
    /// Apply the lexicon mask.
    pub constrained: bool,
    pub length_norm: LengthNorm,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { width: 5, max_len: 200, constrained: true, length_norm: LengthNorm::Sum }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypothesis {
    /// Emitted ids without the final EOS.
    pub tokens: Vec<TokenId>,
    pub score: f64,
}

impl Hypothesis {
    fn rank(&self, norm: LengthNorm) -> f64 {
        match norm {
            LengthNorm::Sum => self.score,
            LengthNorm::Mean => self.score / (self.tokens.len() + 1) as f64,
        }
    }
}

struct Candidate {
    state: DecodeState,
    finished: bool,
}

fn by_score_then_ids(a: (f64, &[TokenId]), b: (f64, &[TokenId])) -> Ordering {
    b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1))
}

/// Beam search over `scorer`, masked by `lexicon` when
/// `config.constrained` is set.
///
/// Returns up to `width` finished hypotheses, best first. Ties are broken
/// by comparing token ids lexicographically.
pub fn beam_search(
    scorer: &mut dyn TokenScorer,
    ctx: &ScoreContext<'_>,
    lexicon: &Lexicon<'_>,
    config: &BeamConfig,
) -> Result<Vec<Hypothesis>, DecodeError> {
    if config.width == 0 || config.max_len == 0 {
        return Err(DecodeError::InvalidConfig("beam width and max length must be at least 1".into()));
    }
    let vocab_size = lexicon.vocab.len();
    if scorer.vocab_size() != vocab_size || scorer.eos_id() != lexicon.vocab.eos() {
        return Err(DecodeError::InvalidConfig(format!(
            "scorer vocabulary ({} tokens, eos {}) does not match the lexicon ({} tokens, eos {})",
            scorer.vocab_size(),
            scorer.eos_id(),
            vocab_size,
            lexicon.vocab.eos()
        )));
    }
    let eos = lexicon.vocab.eos();
    let mut beams = vec![DecodeState::new()];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let mut non_positive = true;

    while !beams.is_empty() {
        let mut candidates: Vec<Candidate> = Vec::new();
        for state in &beams {
            let allowed = if config.constrained {
                lexicon.allowed_tokens(state)
            } else {
                AllowedTokens::All { vocab_size }
            };
            let ids: Vec<TokenId> = if state.tokens.len() >= config.max_len {
                if allowed.contains(eos) {
                    vec![eos]
                } else {
                    Vec::new()
                }
            } else {
                allowed.to_vec()
            };
            if ids.is_empty() {
                continue;
            }
            let scores = scorer.score(ctx, &state.tokens, &ids).map_err(DecodeError::Scorer)?;
            if scores.len() != ids.len() {
                return Err(DecodeError::Scorer(ScorerError::ProtocolViolation(format!(
                    "{} scores for {} candidates",
                    scores.len(),
                    ids.len()
                ))));
            }
            for (&id, &s) in ids.iter().zip(&scores) {
                if s == f64::NEG_INFINITY {
                    continue;
                }
                if !s.is_finite() {
                    return Err(DecodeError::Scorer(ScorerError::ProtocolViolation(format!(
                        "non-finite score {s} for token {id}"
                    ))));
                }
                non_positive &= s <= 0.0;
                let score = state.score + s;
                if id == eos {
                    candidates.push(Candidate {
                        state: DecodeState { score, ..state.clone() },
                        finished: true,
                    });
                    continue;
                }
                let successors = if config.constrained {
                    lexicon.successors(state, id)
                } else {
                    vec![(Cursor::Inactive, false)]
                };
                for (cursor, in_literal) in successors {
                    let mut tokens = state.tokens.clone();
                    tokens.push(id);
                    candidates.push(Candidate {
                        state: DecodeState { tokens, cursor, in_literal, score },
                        finished: false,
                    });
                }
            }
        }
        candidates.sort_by(|a, b| {
            let ka = (a.state.score, a.state.tokens.as_slice());
            let kb = (b.state.score, b.state.tokens.as_slice());
            by_score_then_ids(ka, kb)
                .then_with(|| a.finished.cmp(&b.finished).reverse())
                .then_with(|| a.state.cursor.cmp(&b.state.cursor))
                .then_with(|| a.state.in_literal.cmp(&b.state.in_literal))
        });
        let mut next = Vec::with_capacity(config.width);
        for c in candidates {
            if next.len() == config.width {
                break;
            }
            if c.finished {
                if !finished.iter().any(|h| h.tokens == c.state.tokens) {
                    finished.push(Hypothesis { tokens: c.state.tokens, score: c.state.score });
                }
            } else {
                next.push(c.state);
            }
        }
        beams = next;

        // With non-positive step scores a live beam can only get worse, so
        // once `width` finished hypotheses beat every live one we are done.
        if non_positive && config.length_norm == LengthNorm::Sum && finished.len() >= config.width {
            finished.sort_by(|a, b| by_score_then_ids((a.score, &a.tokens), (b.score, &b.tokens)));
            let bar = finished[config.width - 1].score;
            if beams.iter().all(|b| b.score < bar) {
                break;
            }
        }
    }
    if finished.is_empty() {
        return Err(DecodeError::NoValidHypothesis);
    }
    finished.sort_by(|a, b| {
        by_score_then_ids((a.rank(config.length_norm), &a.tokens), (b.rank(config.length_norm), &b.tokens))
    });
    finished.truncate(config.width);
    Ok(finished)
}
