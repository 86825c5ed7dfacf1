//! Epsilon sampling: ancestral sampling after dropping tokens whose
//! probability is below `epsilon`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scorers::TranslationScorer;
use crate::scoring::Hypothesis;
use crate::vocab::{TokenId, BOS, EOS};

/// Draws `count` sequences of at most `max_len` tokens. When every token
/// falls below `epsilon` the most probable one is taken.
pub fn epsilon_sample<N: TranslationScorer>(
    nmt: &N,
    source: &[TokenId],
    epsilon: f64,
    count: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<Hypothesis>> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} not in [0, 1)")));
    }
    if max_len == 0 {
        return Err(Error::InvalidConfig("max_len must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let mut hyp = Hypothesis::default();
        let mut state = nmt.init(source);
        while !hyp.finished && hyp.len() < max_len {
            let logprobs = nmt.next_token_logprobs(&state);
            let weights: Vec<f64> = logprobs
                .iter()
                .enumerate()
                .map(|(id, lp)| {
                    let p = lp.exp();
                    if id as TokenId == BOS || p < epsilon {
                        0.0
                    } else {
                        p
                    }
                })
                .collect();
            let token = match WeightedIndex::new(&weights) {
                Ok(dist) => dist.sample(&mut rng) as TokenId,
                Err(_) => argmax(&logprobs),
            };
            hyp = hyp.extend(token, logprobs[token as usize], None);
            state = nmt.advance(&state, token);
        }
        samples.push(hyp);
    }
    Ok(samples)
}

fn argmax(logprobs: &[f64]) -> TokenId {
    let mut best = EOS;
    for (id, &lp) in logprobs.iter().enumerate() {
        if id as TokenId != BOS && lp > logprobs[best as usize] {
            best = id as TokenId;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::TableScorer;
    use crate::vocab::Vocabulary;

    fn model() -> TableScorer {
        let v = Vocabulary::new(["a", "b"]).unwrap();
        TableScorer::new(v, vec![0.0, 0.2, 0.0, 0.5, 0.3]).unwrap()
    }

    #[test]
    fn same_seed_same_samples() {
        let a = epsilon_sample(&model(), &[], 0.0, 8, 6, 3).unwrap();
        let b = epsilon_sample(&model(), &[], 0.0, 8, 6, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|h| h.len() <= 6));
    }

    #[test]
    fn large_epsilon_is_greedy() {
        let s = epsilon_sample(&model(), &[], 0.4, 5, 4, 1).unwrap();
        assert!(s.iter().all(|h| h.tokens == vec![3, 3, 3, 3]));
    }

    #[test]
    fn all_below_epsilon_falls_back_to_argmax() {
        let s = epsilon_sample(&model(), &[], 0.9, 2, 2, 0).unwrap();
        assert!(s.iter().all(|h| h.tokens == vec![3, 3]));
    }

    #[test]
    fn bad_epsilon() {
        assert!(epsilon_sample(&model(), &[], 1.0, 1, 2, 0).is_err());
    }
}
