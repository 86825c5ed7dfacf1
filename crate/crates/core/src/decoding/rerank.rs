//! N-best re-ranking with a full-sequence QE pass.

use crate::error::Result;
use crate::scorers::QeScorer;
use crate::scoring::{clamp_log, DecodeConfig, Hypothesis, ScoredEntry, ScoredNBest};
use crate::vocab::TokenId;

/// Scores each finished candidate with `qe` from scratch, merges with
/// `config.alpha` and re-sorts. Any QE logs already on the candidates are
/// replaced. Equal merged scores keep the input order.
pub fn rerank_nbest<'a, Q, I>(
    candidates: I,
    qe: &Q,
    source: &[TokenId],
    config: &DecodeConfig,
) -> Result<ScoredNBest>
where
    Q: QeScorer,
    I: IntoIterator<Item = &'a Hypothesis>,
{
    let scored = candidates.into_iter().map(|hyp| {
        let mut hyp = hyp.clone();
        hyp.qe_good_logprobs = qe
            .score_tokens(source, &hyp.tokens)
            .into_iter()
            .map(|lp| clamp_log(lp, config.logprob_floor))
            .collect();
        hyp
    });
    rescore(scored, config)
}

/// Ranks hypotheses by the merged score of the logs they already carry.
pub fn rescore<I>(candidates: I, config: &DecodeConfig) -> Result<ScoredNBest>
where
    I: IntoIterator<Item = Hypothesis>,
{
    config.validate()?;
    let entries = candidates
        .into_iter()
        .map(|hyp| ScoredEntry::score(hyp, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoredNBest::ranked(config.alpha, entries))
}
