use serde::{Deserialize, Serialize};

use crate::decoding::rescore;
use crate::error::{Error, Result};
use crate::scorers::QeScorer;
use crate::scoring::{clamp_log, DecodeConfig, Hypothesis};
use crate::vocab::TokenId;

/// One segment's N-best list and the QE model that judges it.
#[derive(Debug, Clone)]
pub struct SweepSegment<Q> {
    pub source: Vec<TokenId>,
    pub candidates: Vec<Hypothesis>,
    pub qe: Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub quality: f64,
}

/// For each `alpha` in `grid`, re-ranks every segment and averages
/// `quality(segment index, top-1)`.
pub fn alpha_sweep<Q, F>(
    segments: &[SweepSegment<Q>],
    grid: &[f64],
    config: &DecodeConfig,
    quality: F,
) -> Result<Vec<SweepPoint>>
where
    Q: QeScorer,
    F: Fn(usize, &Hypothesis) -> f64,
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty alpha grid".into()));
    }
    if segments.is_empty() {
        return Err(Error::InvalidConfig("no segments to sweep".into()));
    }
    // QE scores do not depend on alpha; compute them once.
    let scored: Vec<Vec<Hypothesis>> = segments
        .iter()
        .map(|seg| {
            seg.candidates
                .iter()
                .map(|hyp| {
                    let mut hyp = hyp.clone();
                    hyp.qe_good_logprobs = seg
                        .qe
                        .score_tokens(&seg.source, &hyp.tokens)
                        .into_iter()
                        .map(|lp| clamp_log(lp, config.logprob_floor))
                        .collect();
                    hyp
                })
                .collect()
        })
        .collect();
    grid.iter()
        .map(|&alpha| {
            let cfg = DecodeConfig {
                alpha,
                ..config.clone()
            };
            let mut total = 0.0;
            for (i, cands) in scored.iter().enumerate() {
                let ranked = rescore(cands.iter().cloned(), &cfg)?;
                let best = ranked
                    .best()
                    .ok_or_else(|| Error::InvalidConfig(format!("segment {i} has no candidates")))?;
                total += quality(i, &best.hypothesis);
            }
            Ok(SweepPoint {
                alpha,
                quality: total / scored.len() as f64,
            })
        })
        .collect()
}
