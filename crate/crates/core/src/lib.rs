//! Quality-aware beam search for sequence-to-sequence translation.
//!
//! A translation scorer proposes extensions, a uni-directional token-level
//! QE scorer judges each appended token, and beam pruning ranks partial
//! hypotheses by
//!
//! ```text
//! alpha * mean log P(h_i | h_<i, S) + (1 - alpha) * mean log P(GOOD_i | h_<=i, S)
//! ```
//!
//! The crate also ships the pieces needed to train and evaluate such a
//! system at small scale: an n-gram translation model, an MQM span labeler,
//! a logistic token classifier, re-ranking, MBR, and an evaluation harness.

pub mod annotation;
pub mod cli;
pub mod decoding;
pub mod error;
pub mod eval;
pub mod format;
pub mod scorers;
pub mod scoring;
pub mod synthetic;
pub mod vocab;

pub use decoding::{
    beam_search, epsilon_sample, exhaustive_decode, exhaustive_decode_nmt, mbr_decode,
    qa_beam_search, rerank_nbest, Decoded,
};
pub use error::{Error, Result};
pub use scorers::{QeScorer, TranslationScorer};
pub use scoring::{
    merged_score, nmt_avg_logprob, qe_avg_good_logprob, DecodeConfig, Hypothesis, ScoredEntry,
    ScoredNBest,
};
pub use vocab::{TokenId, Vocabulary, BOS, EOS, UNK};
