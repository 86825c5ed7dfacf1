//! Hypotheses, decoding configuration and the merged score.
//!
//! A hypothesis stores one translation log-probability and one
//! `log P(GOOD)` per emitted token. Sequence scores are always recomputed
//! from these per-token values:
//!
//! ```text
//! score_nmt = mean_i log P(h_i | h_<i, S)
//! score_qe  = mean_i log P(GOOD_i | h_<=i, S)
//! merged    = alpha * score_nmt + (1 - alpha) * score_qe
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{TokenId, EOS};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub nmt_logprobs: Vec<f64>,
    /// Empty when the hypothesis was never scored by a QE model.
    pub qe_good_logprobs: Vec<f64>,
    pub finished: bool,
}

impl Hypothesis {
    pub fn new(tokens: Vec<TokenId>, nmt_logprobs: Vec<f64>) -> Result<Self> {
        if tokens.len() != nmt_logprobs.len() {
            return Err(Error::LengthMismatch(tokens.len(), nmt_logprobs.len()));
        }
        let finished = tokens.last() == Some(&EOS);
        Ok(Hypothesis {
            tokens,
            nmt_logprobs,
            qe_good_logprobs: Vec::new(),
            finished,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn has_qe(&self) -> bool {
        !self.qe_good_logprobs.is_empty()
    }

    /// Appends one token, returning a new hypothesis.
    pub fn extend(&self, token: TokenId, nmt_logprob: f64, qe_good_logprob: Option<f64>) -> Self {
        let mut next = self.clone();
        next.tokens.push(token);
        next.nmt_logprobs.push(nmt_logprob);
        if let Some(lp) = qe_good_logprob {
            next.qe_good_logprobs.push(lp);
        }
        next.finished = token == EOS;
        next
    }

    /// Tokens without a trailing EOS.
    pub fn content(&self) -> &[TokenId] {
        match self.tokens.split_last() {
            Some((&EOS, rest)) => rest,
            _ => &self.tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub alpha: f64,
    pub num_beams: usize,
    pub topk: usize,
    pub max_len: usize,
    pub logprob_floor: f64,
    pub include_eos_in_qe: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            alpha: 0.5,
            num_beams: 5,
            topk: 5,
            max_len: 64,
            logprob_floor: -30.0,
            include_eos_in_qe: true,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} not in [0, 1]", self.alpha)));
        }
        if self.num_beams == 0 || self.topk == 0 || self.max_len == 0 {
            return Err(Error::InvalidConfig(
                "num_beams, topk and max_len must be positive".into(),
            ));
        }
        if !self.logprob_floor.is_finite() || self.logprob_floor >= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "logprob_floor {} must be a negative finite number",
                self.logprob_floor
            )));
        }
        Ok(())
    }
}

/// Mean translation log-probability over all tokens.
pub fn nmt_avg_logprob(hyp: &Hypothesis) -> Result<f64> {
    mean(&hyp.nmt_logprobs).ok_or(Error::EmptyHypothesis)
}

/// Mean `log P(GOOD)` over the scored tokens, each clamped at the floor.
/// A trailing EOS is left out when `include_eos_in_qe` is off.
pub fn qe_avg_good_logprob(hyp: &Hypothesis, config: &DecodeConfig) -> Result<f64> {
    qe_average(hyp, config.logprob_floor, config.include_eos_in_qe)
}

pub(crate) fn qe_average(hyp: &Hypothesis, floor: f64, include_eos: bool) -> Result<f64> {
    if hyp.qe_good_logprobs.is_empty() {
        return Err(Error::EmptyHypothesis);
    }
    let mut logs = &hyp.qe_good_logprobs[..];
    if !include_eos && hyp.tokens.last() == Some(&EOS) {
        logs = &logs[..logs.len() - 1];
    }
    let clamped: Vec<f64> = logs.iter().map(|&lp| clamp_log(lp, floor)).collect();
    mean(&clamped).ok_or(Error::EmptyInclusion)
}

pub fn merged_score(score_nmt: f64, score_qe: f64, alpha: f64) -> Result<f64> {
    if !score_nmt.is_finite() {
        return Err(Error::NonFinite(score_nmt));
    }
    if !score_qe.is_finite() {
        return Err(Error::NonFinite(score_qe));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} not in [0, 1]")));
    }
    Ok(alpha * score_nmt + (1.0 - alpha) * score_qe)
}

/// `max(lp, floor)`, mapping NaN and -inf to the floor.
pub fn clamp_log(lp: f64, floor: f64) -> f64 {
    if lp.is_nan() || lp < floor {
        floor
    } else {
        lp
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntry {
    pub hypothesis: Hypothesis,
    pub score_nmt: f64,
    /// `None` for plain beam search, where no QE model is consulted.
    pub score_qe: Option<f64>,
    pub merged: f64,
}

impl ScoredEntry {
    /// Scores a hypothesis by averaging per-token log-probs. Without QE logs the
    /// merged score is the translation score alone.
    pub fn score(hypothesis: Hypothesis, config: &DecodeConfig) -> Result<Self> {
        let score_nmt = nmt_avg_logprob(&hypothesis)?;
        if !hypothesis.has_qe() {
            return Ok(ScoredEntry {
                hypothesis,
                score_nmt,
                score_qe: None,
                merged: score_nmt,
            });
        }
        let score_qe = match qe_avg_good_logprob(&hypothesis, config) {
            // A lone EOS has nothing else to average over.
            Err(Error::EmptyInclusion) => qe_average(&hypothesis, config.logprob_floor, true)?,
            other => other?,
        };
        let merged = merged_score(score_nmt, score_qe, config.alpha)?;
        Ok(ScoredEntry {
            hypothesis,
            score_nmt,
            score_qe: Some(score_qe),
            merged,
        })
    }
}

/// Finished hypotheses ranked by merged score, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNBest {
    pub alpha: f64,
    pub entries: Vec<ScoredEntry>,
}

impl ScoredNBest {
    /// Sorts entries by descending merged score; the sort is stable so equal
    /// scores keep their input order.
    pub fn ranked(alpha: f64, mut entries: Vec<ScoredEntry>) -> Self {
        entries.sort_by(|a, b| b.merged.total_cmp(&a.merged));
        ScoredNBest { alpha, entries }
    }

    pub fn best(&self) -> Option<&ScoredEntry> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = &Hypothesis> {
        self.entries.iter().map(|e| &e.hypothesis)
    }

    /// Checks ordering and the merged-score identity of every entry.
    pub fn check_invariants(&self) -> bool {
        let sorted = self.entries.windows(2).all(|w| w[0].merged >= w[1].merged);
        let merged_ok = self.entries.iter().all(|e| {
            let expected = match e.score_qe {
                Some(qe) => self.alpha * e.score_nmt + (1.0 - self.alpha) * qe,
                None => e.score_nmt,
            };
            (expected - e.merged).abs() <= 1e-12
        });
        sorted && merged_ok
    }
}
