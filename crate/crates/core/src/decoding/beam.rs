//! Beam search with optional per-step QE re-ranking.
//!
//! Every step, each active beam proposes its `topk` best extensions by
//! translation log-probability (plus EOS on the last step, where only
//! finishing candidates are kept). Each proposal is scored with the merged
//! score (mean translation log-prob and mean `log P(GOOD)`, mixed by
//! `alpha`), and the best `num_beams` proposals survive. Survivors ending in
//! EOS move to the finished pool with their final score.
//!
//! Plain beam search is the same loop with every extension proposed, no QE
//! model and `alpha = 1`.

use std::time::Instant;

use super::Decoded;
use crate::error::{Error, Result};
use crate::eval::CostCounters;
use crate::scorers::{QeScorer, TranslationScorer};
use crate::scoring::{clamp_log, DecodeConfig, Hypothesis, ScoredEntry, ScoredNBest};
use crate::vocab::{TokenId, BOS, EOS};

struct Beam<NS, QS> {
    entry: ScoredEntry,
    nmt_state: NS,
    qe_state: Option<QS>,
}

struct Candidate<QS> {
    parent: usize,
    token: TokenId,
    entry: ScoredEntry,
    qe_state: Option<QS>,
}

struct BeamState<NS, QS> {
    active: Vec<Beam<NS, QS>>,
    finished: Vec<ScoredEntry>,
    step: usize,
}

/// Standard beam search ranked by mean translation log-probability.
pub fn beam_search<N: TranslationScorer>(
    nmt: &N,
    source: &[TokenId],
    config: &DecodeConfig,
) -> Result<Decoded> {
    let config = DecodeConfig {
        alpha: 1.0,
        topk: nmt.vocab().len(),
        ..config.clone()
    };
    search::<N, NoQe>(nmt, None, source, &config)
}

/// Beam search that re-ranks each step's `topk` extensions per beam with the
/// merged translation/QE score.
pub fn qa_beam_search<N: TranslationScorer, Q: QeScorer>(
    nmt: &N,
    qe: &Q,
    source: &[TokenId],
    config: &DecodeConfig,
) -> Result<Decoded> {
    check_vocab_match(nmt.vocab(), qe.vocab())?;
    search(nmt, Some(qe), source, config)
}

/// Stand-in type parameter for searches without a QE model.
pub(crate) enum NoQe {}

impl QeScorer for NoQe {
    type State = ();

    fn init(&self, _: &[TokenId]) {
        match *self {}
    }

    fn extend(&self, _: &(), _: TokenId) -> ((), f64) {
        match *self {}
    }
}

/// Translation log-probs of the `topk` best extensions, ties to lower ids.
/// Zero-probability tokens and BOS are never proposed.
pub(crate) fn top_extensions(logprobs: &[f64], topk: usize) -> Vec<(TokenId, f64)> {
    let mut ext: Vec<(TokenId, f64)> = logprobs
        .iter()
        .enumerate()
        .filter(|&(id, lp)| id as TokenId != BOS && lp.is_finite())
        .map(|(id, &lp)| (id as TokenId, lp))
        .collect();
    ext.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ext.truncate(topk);
    ext
}

/// Largest merged score any completion of `entry` can reach within
/// `config.max_len` tokens, assuming every future log-prob is zero.
fn upper_bound(entry: &ScoredEntry, config: &DecodeConfig) -> f64 {
    let hyp = &entry.hypothesis;
    let max_len = config.max_len as f64;
    let nmt_sum: f64 = hyp.nmt_logprobs.iter().sum();
    match entry.score_qe {
        None => nmt_sum / max_len,
        Some(_) => {
            let qe_sum: f64 = hyp
                .qe_good_logprobs
                .iter()
                .map(|&lp| clamp_log(lp, config.logprob_floor))
                .sum();
            let qe_len = if config.include_eos_in_qe { max_len } else { (max_len - 1.0).max(1.0) };
            config.alpha * nmt_sum / max_len + (1.0 - config.alpha) * qe_sum / qe_len
        }
    }
}

fn search<N: TranslationScorer, Q: QeScorer>(
    nmt: &N,
    qe: Option<&Q>,
    source: &[TokenId],
    config: &DecodeConfig,
) -> Result<Decoded> {
    config.validate()?;
    let started = Instant::now();
    let mut counters = CostCounters::default();

    let root = Beam {
        entry: ScoredEntry {
            hypothesis: Hypothesis::default(),
            score_nmt: 0.0,
            score_qe: None,
            merged: 0.0,
        },
        nmt_state: nmt.init(source),
        qe_state: qe.map(|q| q.init(source)),
    };
    let mut state = BeamState {
        active: vec![root],
        finished: Vec::new(),
        step: 0,
    };
    let mut best_unfinished: Option<ScoredEntry> = None;

    while !state.active.is_empty() && state.step < config.max_len {
        let last_step = state.step + 1 == config.max_len;
        let mut candidates: Vec<Candidate<Q::State>> = Vec::new();
        for (parent, beam) in state.active.iter().enumerate() {
            let logprobs = nmt.next_token_logprobs(&beam.nmt_state);
            counters.nmt_distribution_calls += 1;
            let mut proposals = top_extensions(&logprobs, config.topk);
            let eos_lp = logprobs[EOS as usize];
            if last_step && eos_lp.is_finite() && !proposals.iter().any(|&(t, _)| t == EOS) {
                proposals.push((EOS, eos_lp));
            }
            for (token, lp) in proposals {
                let (qe_state, good) = match (qe, &beam.qe_state) {
                    (Some(q), Some(s)) => {
                        let (next, good) = q.extend(s, token);
                        counters.qe_extend_calls += 1;
                        (Some(next), Some(clamp_log(good, config.logprob_floor)))
                    }
                    _ => (None, None),
                };
                let hyp = beam.entry.hypothesis.extend(token, lp, good);
                let entry = ScoredEntry::score(hyp, config)?;
                counters.merged_evaluations += 1;
                candidates.push(Candidate {
                    parent,
                    token,
                    entry,
                    qe_state,
                });
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            b.entry
                .merged
                .total_cmp(&a.entry.merged)
                .then(a.token.cmp(&b.token))
                .then(a.parent.cmp(&b.parent))
        });
        if last_step {
            // Nothing but EOS can finish now.
            if let Some(c) = candidates.iter().find(|c| c.token != EOS) {
                best_unfinished = Some(c.entry.clone());
            }
            candidates.retain(|c| c.token == EOS);
        }
        candidates.truncate(config.num_beams);

        let mut next_active = Vec::with_capacity(candidates.len());
        for cand in candidates {
            if cand.token == EOS {
                state.finished.push(cand.entry);
            } else {
                let nmt_state = nmt.advance(&state.active[cand.parent].nmt_state, cand.token);
                next_active.push(Beam {
                    entry: cand.entry,
                    nmt_state,
                    qe_state: cand.qe_state,
                });
            }
        }
        state.active = next_active;
        state.step += 1;
        if let Some(top) = state.active.first() {
            best_unfinished = Some(top.entry.clone());
        }

        if state.finished.len() >= config.num_beams {
            let mut scores: Vec<f64> = state.finished.iter().map(|e| e.merged).collect();
            scores.sort_by(|a, b| b.total_cmp(a));
            let worst_kept = scores[config.num_beams - 1];
            let can_improve = state
                .active
                .iter()
                .any(|b| upper_bound(&b.entry, config) > worst_kept);
            if !can_improve {
                break;
            }
        }
    }

    let unfinished = state.finished.is_empty();
    let entries = if unfinished {
        best_unfinished.into_iter().collect()
    } else {
        state.finished
    };
    let mut nbest = ScoredNBest::ranked(config.alpha, entries);
    nbest.entries.truncate(config.num_beams);
    counters.wall_time = started.elapsed().as_secs_f64();
    Ok(Decoded {
        nbest,
        counters,
        steps: state.step,
        unfinished,
    })
}

/// Fails unless both scorers agree on every id the translation model uses.
fn check_vocab_match(
    nmt: &crate::vocab::Vocabulary,
    qe: Option<&crate::vocab::Vocabulary>,
) -> Result<()> {
    if let Some(qe) = qe {
        let agree = nmt.len() <= qe.len()
            && nmt.tokens().iter().zip(qe.tokens()).all(|(a, b)| a == b);
        if !agree {
            return Err(Error::InvalidConfig(
                "translation and QE vocabularies do not match".into(),
            ));
        }
    }
    Ok(())
}
