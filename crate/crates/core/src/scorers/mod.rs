//! Translation and token-level QE scorer contracts.
//!
//! Scorer states are values: extending a state returns a new one and leaves
//! the original untouched, so every beam keeps its own lineage.

use std::sync::Arc;

use crate::vocab::{TokenId, Vocabulary};

pub mod classifier;
pub mod ngram;
pub mod oracle;
pub mod table;

pub use classifier::{
    classify_tokens, macro_f1, train_token_qe, train_token_qe_with, LabeledExample,
    TokenQeClassifier, TrainConfig, TrainOutcome,
};
pub use ngram::{NgramConfig, NgramScorer};
pub use oracle::{oracle_qe_build, OracleQe};
pub use table::TableScorer;

/// Autoregressive translation model `P(h_i | h_<i, S)`.
pub trait TranslationScorer {
    type State: Clone + Send + Sync;

    fn vocab(&self) -> &Vocabulary;

    /// State bound to `source` with an empty target prefix.
    fn init(&self, source: &[TokenId]) -> Self::State;

    /// Log-probabilities over the whole vocabulary. Impossible tokens are
    /// `-inf`; the exponentiated vector sums to one.
    fn next_token_logprobs(&self, state: &Self::State) -> Vec<f64>;

    fn advance(&self, state: &Self::State, token: TokenId) -> Self::State;
}

/// Uni-directional token QE: `log P(GOOD)` for each appended token, given only
/// the source and the preceding target tokens.
pub trait QeScorer {
    type State: Clone + Send + Sync;

    /// Vocabulary the scorer was trained on, if it has one.
    fn vocab(&self) -> Option<&Vocabulary> {
        None
    }

    fn init(&self, source: &[TokenId]) -> Self::State;

    fn extend(&self, state: &Self::State, token: TokenId) -> (Self::State, f64);

    /// `log P(GOOD)` for every token of `target`, computed from scratch.
    fn score_tokens(&self, source: &[TokenId], target: &[TokenId]) -> Vec<f64> {
        let mut state = self.init(source);
        target
            .iter()
            .map(|&tok| {
                let (next, lp) = self.extend(&state, tok);
                state = next;
                lp
            })
            .collect()
    }
}

impl<T: TranslationScorer + ?Sized> TranslationScorer for &T {
    type State = T::State;

    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn init(&self, source: &[TokenId]) -> Self::State {
        (**self).init(source)
    }

    fn next_token_logprobs(&self, state: &Self::State) -> Vec<f64> {
        (**self).next_token_logprobs(state)
    }

    fn advance(&self, state: &Self::State, token: TokenId) -> Self::State {
        (**self).advance(state, token)
    }
}

impl<T: QeScorer + ?Sized> QeScorer for &T {
    type State = T::State;

    fn vocab(&self) -> Option<&Vocabulary> {
        (**self).vocab()
    }

    fn init(&self, source: &[TokenId]) -> Self::State {
        (**self).init(source)
    }

    fn extend(&self, state: &Self::State, token: TokenId) -> (Self::State, f64) {
        (**self).extend(state, token)
    }

    fn score_tokens(&self, source: &[TokenId], target: &[TokenId]) -> Vec<f64> {
        (**self).score_tokens(source, target)
    }
}

/// Runtime choice between the QE scorers shipped with the crate.
#[derive(Debug, Clone)]
pub enum AnyQe {
    Oracle(OracleQe),
    Classifier(Arc<TokenQeClassifier>),
}

#[derive(Debug, Clone)]
pub enum AnyQeState {
    Oracle(<OracleQe as QeScorer>::State),
    Classifier(<TokenQeClassifier as QeScorer>::State),
}

impl QeScorer for AnyQe {
    type State = AnyQeState;

    fn vocab(&self) -> Option<&Vocabulary> {
        match self {
            AnyQe::Oracle(_) => None,
            AnyQe::Classifier(q) => Some(q.vocab()),
        }
    }

    fn init(&self, source: &[TokenId]) -> AnyQeState {
        match self {
            AnyQe::Oracle(q) => AnyQeState::Oracle(q.init(source)),
            AnyQe::Classifier(q) => AnyQeState::Classifier(q.init(source)),
        }
    }

    fn extend(&self, state: &AnyQeState, token: TokenId) -> (AnyQeState, f64) {
        match (self, state) {
            (AnyQe::Oracle(q), AnyQeState::Oracle(s)) => {
                let (s, lp) = q.extend(s, token);
                (AnyQeState::Oracle(s), lp)
            }
            (AnyQe::Classifier(q), AnyQeState::Classifier(s)) => {
                let (s, lp) = q.extend(s, token);
                (AnyQeState::Classifier(s), lp)
            }
            _ => unreachable!("QE state used with a different scorer"),
        }
    }

    fn score_tokens(&self, source: &[TokenId], target: &[TokenId]) -> Vec<f64> {
        match self {
            AnyQe::Oracle(q) => q.score_tokens(source, target),
            AnyQe::Classifier(q) => q.score_tokens(source, target),
        }
    }
}

/// Exp-sum of a log-probability vector.
pub fn total_mass(logprobs: &[f64]) -> f64 {
    logprobs.iter().map(|lp| lp.exp()).sum()
}
