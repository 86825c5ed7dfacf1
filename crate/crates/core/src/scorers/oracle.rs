//! Reference-aware QE test double.
//!
//! A token is GOOD (probability `p_match`) while the hypothesis is still a
//! prefix of `reference + EOS`; the first divergence and everything after it
//! gets `p_miss`.

use serde::{Deserialize, Serialize};

use super::QeScorer;
use crate::error::{Error, Result};
use crate::vocab::{TokenId, EOS};

pub const DEFAULT_P_MATCH: f64 = 0.99;
pub const DEFAULT_P_MISS: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleQe {
    reference: Vec<TokenId>,
    p_match: f64,
    p_miss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleState {
    pub position: usize,
    pub diverged: bool,
}

/// `reference` is the expected target without EOS.
pub fn oracle_qe_build(reference: &[TokenId], p_match: f64, p_miss: f64) -> Result<OracleQe> {
    if reference.is_empty() || reference == [EOS] {
        return Err(Error::InvalidConfig("oracle reference is empty".into()));
    }
    if !(0.0 < p_miss && p_miss < p_match && p_match <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "need 0 < p_miss < p_match <= 1, got p_miss={p_miss} p_match={p_match}"
        )));
    }
    let mut reference = reference.to_vec();
    if reference.last() != Some(&EOS) {
        reference.push(EOS);
    }
    Ok(OracleQe {
        reference,
        p_match,
        p_miss,
    })
}

impl OracleQe {
    pub fn with_defaults(reference: &[TokenId]) -> Result<Self> {
        oracle_qe_build(reference, DEFAULT_P_MATCH, DEFAULT_P_MISS)
    }

    /// Reference tokens, EOS-terminated.
    pub fn reference(&self) -> &[TokenId] {
        &self.reference
    }

    /// Number of target tokens the oracle marks BAD.
    pub fn mismatches(&self, target: &[TokenId]) -> usize {
        target.len() - self.common_prefix(target)
    }

    fn common_prefix(&self, target: &[TokenId]) -> usize {
        target
            .iter()
            .zip(&self.reference)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

impl QeScorer for OracleQe {
    type State = OracleState;

    fn init(&self, _source: &[TokenId]) -> OracleState {
        OracleState {
            position: 0,
            diverged: false,
        }
    }

    fn extend(&self, state: &OracleState, token: TokenId) -> (OracleState, f64) {
        let good = !state.diverged && self.reference.get(state.position) == Some(&token);
        let next = OracleState {
            position: state.position + 1,
            diverged: !good,
        };
        let p = if good { self.p_match } else { self.p_miss };
        (next, p.ln())
    }

    fn score_tokens(&self, _source: &[TokenId], target: &[TokenId]) -> Vec<f64> {
        let lcp = self.common_prefix(target);
        (0..target.len())
            .map(|i| if i < lcp { self.p_match.ln() } else { self.p_miss.ln() })
            .collect()
    }
}
