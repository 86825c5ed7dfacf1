//! Side-by-side comparison of decoding strategies on a reference corpus.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{paired_bootstrap, token_f1, CostCounters, DEFAULT_RESAMPLES};
use crate::decoding::{beam_search, epsilon_sample, mbr_decode, qa_beam_search, rerank_nbest};
use crate::error::{Error, Result};
use crate::scorers::{OracleQe, QeScorer, TranslationScorer};
use crate::scoring::{DecodeConfig, Hypothesis};
use crate::vocab::TokenId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub source: Vec<TokenId>,
    /// Expected target without EOS.
    pub reference: Vec<TokenId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Beam,
    BeamRerank,
    Qa,
    QaRerank,
    Mbr,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Beam,
        Strategy::BeamRerank,
        Strategy::Qa,
        Strategy::QaRerank,
        Strategy::Mbr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Beam => "beam",
            Strategy::BeamRerank => "beam-rerank",
            Strategy::Qa => "qa",
            Strategy::QaRerank => "qa-rerank",
            Strategy::Mbr => "mbr",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub decode: DecodeConfig,
    pub strategies: Vec<Strategy>,
    /// Beam width whose N-best the re-ranking baseline sees.
    pub rerank_beams: usize,
    /// Sentences concatenated into one segment.
    pub doc_k: usize,
    pub mbr_samples: usize,
    pub epsilon: f64,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            decode: DecodeConfig::default(),
            strategies: Strategy::ALL.to_vec(),
            rerank_beams: 25,
            doc_k: 1,
            mbr_samples: 16,
            epsilon: 0.02,
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutput {
    pub tokens: Vec<TokenId>,
    /// Token F1 against the reference.
    pub quality: f64,
    /// Negative count of tokens the reference oracle marks BAD.
    pub oracle_score: f64,
    pub counters: CostCounters,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOutput {
    pub id: String,
    /// Same order as `CompareReport::strategies`.
    pub outputs: Vec<StrategyOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub mean_quality: f64,
    pub mean_oracle_score: f64,
    pub counters: CostCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub strategies: Vec<StrategySummary>,
    pub per_segment: Vec<SegmentOutput>,
    /// `pairwise_p[i][j]`: one-sided bootstrap p-value that strategy `i`
    /// beats strategy `j`. `None` on the diagonal or with fewer than two
    /// segments.
    pub pairwise_p: Vec<Vec<Option<f64>>>,
    pub counters: CostCounters,
    pub seeds: Seeds,
    pub config: CompareConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub sampling: u64,
    pub bootstrap: u64,
}

/// Joins every `k` consecutive segments into one (a trailing group may be
/// shorter). `k = 1` returns the input unchanged.
pub fn concat_segments(segments: &[Segment], k: usize) -> Vec<Segment> {
    if k <= 1 {
        return segments.to_vec();
    }
    segments
        .chunks(k)
        .map(|group| Segment {
            id: group.iter().map(|s| s.id.as_str()).collect::<Vec<_>>().join("+"),
            source: group.iter().flat_map(|s| s.source.iter().copied()).collect(),
            reference: group.iter().flat_map(|s| s.reference.iter().copied()).collect(),
        })
        .collect()
}

/// Runs every configured strategy on every segment. `qe_for` builds the QE
/// model used for a segment (for example an oracle bound to its reference).
pub fn compare_strategies<N, Q, F>(
    segments: &[Segment],
    nmt: &N,
    qe_for: F,
    config: &CompareConfig,
) -> Result<CompareReport>
where
    N: TranslationScorer + Sync,
    Q: QeScorer,
    F: Fn(&Segment) -> Result<Q> + Sync,
{
    config.decode.validate()?;
    if config.strategies.is_empty() {
        return Err(Error::InvalidConfig("no strategies selected".into()));
    }
    if config.rerank_beams == 0 || config.mbr_samples == 0 {
        return Err(Error::InvalidConfig("rerank_beams and mbr_samples must be positive".into()));
    }
    if let Some(seg) = segments.iter().find(|s| s.reference.is_empty()) {
        return Err(Error::InvalidConfig(format!("segment {} has no reference", seg.id)));
    }
    let docs = concat_segments(segments, config.doc_k);

    let per_segment: Vec<SegmentOutput> = docs
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let qe = qe_for(seg)?;
            let oracle = OracleQe::with_defaults(&seg.reference)?;
            let outputs = config
                .strategies
                .iter()
                .map(|&st| run_one(st, seg, i, nmt, &qe, &oracle, config))
                .collect::<Result<Vec<_>>>()?;
            Ok(SegmentOutput {
                id: seg.id.clone(),
                outputs,
            })
        })
        .collect::<Result<_>>()?;

    let n = per_segment.len().max(1) as f64;
    let mut total = CostCounters::default();
    let mut summaries = Vec::new();
    let mut qualities = Vec::new();
    for (s, &strategy) in config.strategies.iter().enumerate() {
        let mut counters = CostCounters::default();
        let mut q = Vec::with_capacity(per_segment.len());
        let mut oracle_sum = 0.0;
        for seg in &per_segment {
            let out = &seg.outputs[s];
            counters += &out.counters;
            q.push(out.quality);
            oracle_sum += out.oracle_score;
        }
        total += &counters;
        summaries.push(StrategySummary {
            strategy,
            mean_quality: q.iter().sum::<f64>() / n,
            mean_oracle_score: oracle_sum / n,
            counters,
        });
        qualities.push(q);
    }

    let bootstrap_seed = config.seed;
    let k = qualities.len();
    let mut pairwise_p = vec![vec![None; k]; k];
    if per_segment.len() >= 2 {
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    pairwise_p[i][j] = Some(paired_bootstrap(
                        &qualities[i],
                        &qualities[j],
                        config.resamples,
                        bootstrap_seed,
                        false,
                    )?);
                }
            }
        }
    }

    Ok(CompareReport {
        strategies: summaries,
        per_segment,
        pairwise_p,
        counters: total,
        seeds: Seeds {
            sampling: config.seed,
            bootstrap: bootstrap_seed,
        },
        config: config.clone(),
    })
}

fn run_one<N: TranslationScorer, Q: QeScorer>(
    strategy: Strategy,
    seg: &Segment,
    index: usize,
    nmt: &N,
    qe: &Q,
    oracle: &OracleQe,
    config: &CompareConfig,
) -> Result<StrategyOutput> {
    let dc = &config.decode;
    let mut counters = CostCounters::default();
    let mut steps = 0;
    let best: Hypothesis = match strategy {
        Strategy::Beam | Strategy::Qa => {
            let out = if strategy == Strategy::Beam {
                beam_search(nmt, &seg.source, dc)?
            } else {
                qa_beam_search(nmt, qe, &seg.source, dc)?
            };
            counters = out.counters;
            steps = out.steps;
            top(out.nbest.entries.into_iter().map(|e| e.hypothesis))?
        }
        Strategy::BeamRerank | Strategy::QaRerank => {
            let out = if strategy == Strategy::BeamRerank {
                let wide = DecodeConfig {
                    num_beams: config.rerank_beams,
                    ..dc.clone()
                };
                beam_search(nmt, &seg.source, &wide)?
            } else {
                qa_beam_search(nmt, qe, &seg.source, dc)?
            };
            counters = out.counters;
            steps = out.steps;
            counters.qe_extend_calls += out.nbest.hypotheses().map(|h| h.len() as u64).sum::<u64>();
            counters.merged_evaluations += out.nbest.len() as u64;
            let ranked = rerank_nbest(out.nbest.hypotheses(), qe, &seg.source, dc)?;
            top(ranked.entries.into_iter().map(|e| e.hypothesis))?
        }
        Strategy::Mbr => {
            let seed = config.seed.wrapping_add(index as u64);
            let samples =
                epsilon_sample(nmt, &seg.source, config.epsilon, config.mbr_samples, dc.max_len, seed)?;
            counters.nmt_distribution_calls = samples.iter().map(|h| h.len() as u64).sum();
            let pick = mbr_decode(&samples, |a, b| token_f1(a.content(), b.content()))
                .expect("at least one sample");
            samples[pick].clone()
        }
    };
    Ok(StrategyOutput {
        quality: token_f1(best.content(), &seg.reference),
        oracle_score: -(oracle.mismatches(&best.tokens) as f64),
        tokens: best.tokens,
        counters,
        steps,
    })
}

fn top(mut hyps: impl Iterator<Item = Hypothesis>) -> Result<Hypothesis> {
    hyps.next().ok_or(Error::EmptyHypothesis)
}
