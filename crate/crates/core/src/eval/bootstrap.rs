use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;

/// Paired bootstrap p-value for "system A is better than system B".
///
/// Segments are resampled with replacement; the one-sided p-value is the
/// fraction of resamples where `mean(B) >= mean(A)`. The two-sided value
/// doubles the smaller tail (capped at 1).
pub fn paired_bootstrap(
    scores_a: &[f64],
    scores_b: &[f64],
    resamples: usize,
    seed: u64,
    two_sided: bool,
) -> Result<f64> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::LengthMismatch(scores_a.len(), scores_b.len()));
    }
    let n = scores_a.len();
    if n < 2 {
        return Err(Error::Undefined("bootstrap needs at least two segments"));
    }
    if resamples == 0 {
        return Err(Error::InvalidConfig("resamples must be positive".into()));
    }
    let diffs: Vec<f64> = scores_a.iter().zip(scores_b).map(|(a, b)| a - b).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut b_wins, mut a_wins) = (0usize, 0usize);
    for _ in 0..resamples {
        let total: f64 = (0..n).map(|_| diffs[rng.gen_range(0..n)]).sum();
        if total <= 0.0 {
            b_wins += 1;
        }
        if total >= 0.0 {
            a_wins += 1;
        }
    }
    let upper = b_wins as f64 / resamples as f64;
    if two_sided {
        let lower = a_wins as f64 / resamples as f64;
        Ok((2.0 * upper.min(lower)).min(1.0))
    } else {
        Ok(upper)
    }
}
