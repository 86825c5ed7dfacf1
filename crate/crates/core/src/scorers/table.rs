//! Hand-specified translation scorer for tests and constructed examples.
//!
//! Rows are keyed by a suffix of the BOS-prefixed target history. Lookup
//! uses the longest matching suffix, falling back to the default row, so a
//! bigram table is just rows keyed by one token.

use std::collections::BTreeMap;

use rand::Rng;

use super::TranslationScorer;
use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocabulary, BOS, UNK};

#[derive(Debug, Clone, PartialEq)]
pub struct TableScorer {
    vocab: Vocabulary,
    rows: BTreeMap<Vec<TokenId>, Vec<f64>>,
    default_row: Vec<f64>,
    longest_key: usize,
}

impl TableScorer {
    pub fn new(vocab: Vocabulary, default_row: Vec<f64>) -> Result<Self> {
        check_row(&vocab, &default_row)?;
        Ok(TableScorer {
            vocab,
            rows: BTreeMap::new(),
            default_row,
            longest_key: 0,
        })
    }

    /// Adds a row of probabilities for histories ending in `context`.
    pub fn with_row(mut self, context: Vec<TokenId>, row: Vec<f64>) -> Result<Self> {
        check_row(&self.vocab, &row)?;
        self.longest_key = self.longest_key.max(context.len());
        self.rows.insert(context, row);
        Ok(self)
    }

    /// Random bigram table: one row per history token (BOS and every outcome),
    /// with BOS and UNK never predicted.
    pub fn random_bigram<R: Rng>(vocab: Vocabulary, rng: &mut R) -> Self {
        let n = vocab.len();
        let draw = |rng: &mut R| -> Vec<f64> {
            let mut row: Vec<f64> = (0..n as TokenId)
                .map(|id| {
                    if id == BOS || id == UNK {
                        0.0
                    } else {
                        // exponential weights give a flat Dirichlet draw
                        -rng.gen::<f64>().max(1e-12).ln()
                    }
                })
                .collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            row
        };
        let default_row = draw(rng);
        let mut table = TableScorer::new(vocab.clone(), default_row).expect("normalized row");
        for ctx in std::iter::once(BOS).chain(vocab.content_ids()) {
            let row = draw(rng);
            table = table.with_row(vec![ctx], row).expect("normalized row");
        }
        table
    }

    fn row(&self, history: &[TokenId]) -> &[f64] {
        let longest = self.longest_key.min(history.len());
        (1..=longest)
            .rev()
            .find_map(|len| self.rows.get(&history[history.len() - len..]))
            .unwrap_or(&self.default_row)
    }
}

fn check_row(vocab: &Vocabulary, row: &[f64]) -> Result<()> {
    if row.len() != vocab.len() {
        return Err(Error::InvalidConfig(format!(
            "row has {} entries for a vocabulary of {}",
            row.len(),
            vocab.len()
        )));
    }
    if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidConfig("row entries must be probabilities".into()));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("row sums to {total}")));
    }
    Ok(())
}

impl TranslationScorer for TableScorer {
    type State = Vec<TokenId>;

    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn init(&self, _source: &[TokenId]) -> Vec<TokenId> {
        vec![BOS]
    }

    fn next_token_logprobs(&self, history: &Vec<TokenId>) -> Vec<f64> {
        self.row(history).iter().map(|p| p.ln()).collect()
    }

    fn advance(&self, history: &Vec<TokenId>, token: TokenId) -> Vec<TokenId> {
        let mut next = history.clone();
        next.push(token);
        next
    }
}
