//! Evaluation harness: correlations, quality proxies, significance testing,
//! alpha sweeps, strategy comparison and cost counters.

mod bootstrap;
mod compare;
mod correlation;
mod counters;
mod proxy;
mod sweep;

pub use bootstrap::{paired_bootstrap, DEFAULT_RESAMPLES};
pub use compare::{
    compare_strategies, concat_segments, CompareConfig, CompareReport, Segment, SegmentOutput,
    Strategy, StrategyOutput, StrategySummary,
};
pub use correlation::{
    kendall, pearson, segment_correlations, spearman, Correlations, SegmentScorePair,
};
pub use counters::CostCounters;
pub use proxy::{chrf, quality_proxy, token_f1};
pub use sweep::{alpha_sweep, SweepPoint, SweepSegment};
