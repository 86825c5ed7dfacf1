//! Brute-force decoding over every EOS-terminated sequence.

use super::beam::NoQe;
use crate::error::{Error, Result};
use crate::scorers::{QeScorer, TranslationScorer};
use crate::scoring::{clamp_log, DecodeConfig, Hypothesis, ScoredEntry, ScoredNBest};
use crate::vocab::{TokenId, BOS, EOS};

pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Scores every EOS-terminated sequence of at most `config.max_len` tokens
/// and returns all of them, best first. Zero-probability sequences are
/// skipped. Fails when `|V|^max_len` exceeds `budget`.
pub fn exhaustive_decode<N: TranslationScorer, Q: QeScorer>(
    nmt: &N,
    qe: &Q,
    source: &[TokenId],
    config: &DecodeConfig,
    budget: u64,
) -> Result<ScoredNBest> {
    run(nmt, Some(qe), source, config, budget)
}

/// Exhaustive decoding by mean translation log-probability alone.
pub fn exhaustive_decode_nmt<N: TranslationScorer>(
    nmt: &N,
    source: &[TokenId],
    config: &DecodeConfig,
    budget: u64,
) -> Result<ScoredNBest> {
    let config = DecodeConfig {
        alpha: 1.0,
        ..config.clone()
    };
    run::<N, NoQe>(nmt, None, source, &config, budget)
}

fn run<N: TranslationScorer, Q: QeScorer>(
    nmt: &N,
    qe: Option<&Q>,
    source: &[TokenId],
    config: &DecodeConfig,
    budget: u64,
) -> Result<ScoredNBest> {
    config.validate()?;
    let space = (nmt.vocab().len() as f64).powi(config.max_len as i32);
    if space > budget as f64 {
        return Err(Error::BudgetExceeded { space, budget });
    }
    let mut out = Vec::new();
    let mut stack = vec![(
        Hypothesis::default(),
        nmt.init(source),
        qe.map(|q| q.init(source)),
    )];
    while let Some((hyp, nmt_state, qe_state)) = stack.pop() {
        let logprobs = nmt.next_token_logprobs(&nmt_state);
        for (id, &lp) in logprobs.iter().enumerate() {
            let token = id as TokenId;
            if token == BOS || !lp.is_finite() {
                continue;
            }
            let (next_qe, good) = match (qe, &qe_state) {
                (Some(q), Some(s)) => {
                    let (next, good) = q.extend(s, token);
                    (Some(next), Some(clamp_log(good, config.logprob_floor)))
                }
                _ => (None, None),
            };
            let next = hyp.extend(token, lp, good);
            if token == EOS {
                out.push(ScoredEntry::score(next, config)?);
            } else if next.len() < config.max_len {
                stack.push((next, nmt.advance(&nmt_state, token), next_qe));
            }
        }
    }
    // DFS order depends on the stack; sort by tokens first so ties are stable.
    out.sort_by(|a, b| a.hypothesis.tokens.cmp(&b.hypothesis.tokens));
    Ok(ScoredNBest::ranked(config.alpha, out))
}
