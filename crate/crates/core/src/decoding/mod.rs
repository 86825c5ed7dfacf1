//! Decoding strategies.

use serde::{Deserialize, Serialize};

use crate::eval::CostCounters;
use crate::scoring::ScoredNBest;

mod beam;
mod exhaustive;
mod mbr;
mod rerank;
mod sampling;

pub use beam::{beam_search, qa_beam_search};
pub use exhaustive::{exhaustive_decode, exhaustive_decode_nmt, DEFAULT_BUDGET};
pub use mbr::mbr_decode;
pub use rerank::{rerank_nbest, rescore};
pub use sampling::epsilon_sample;


/// Result of one beam decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub nbest: ScoredNBest,
    pub counters: CostCounters,
    /// Decoding steps taken.
    pub steps: usize,
    /// Nothing reached EOS within `max_len`; `nbest` then holds the best
    /// unfinished hypothesis.
    pub unfinished: bool,
}
