use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScorePair {
    pub segment_id: String,
    pub system: f64,
    pub human: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
    pub n: usize,
}

fn check(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::Undefined("fewer than two pairs"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Undefined("non-finite score"));
    }
    Ok(())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("constant input"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check(xs, ys)?;
    pearson(&ranks(xs), &ranks(ys))
}

/// Kendall's tau-b.
pub fn kendall(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check(xs, ys)?;
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let dx = xs[i].total_cmp(&xs[j]) as i64;
            let dy = ys[i].total_cmp(&ys[j]) as i64;
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => ties_x += 1,
                (_, 0) => ties_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (concordant + discordant + ties_x) as f64;
    let n1 = (concordant + discordant + ties_y) as f64;
    if n0 == 0.0 || n1 == 0.0 {
        return Err(Error::Undefined("constant input"));
    }
    Ok(((concordant - discordant) as f64 / (n0 * n1).sqrt()).clamp(-1.0, 1.0))
}

/// All three coefficients over the pairs whose id is not in `exclude`.
pub fn segment_correlations(pairs: &[SegmentScorePair], exclude: &[String]) -> Result<Correlations> {
    let kept: Vec<&SegmentScorePair> = pairs
        .iter()
        .filter(|p| !exclude.contains(&p.segment_id))
        .collect();
    let xs: Vec<f64> = kept.iter().map(|p| p.system).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.human).collect();
    Ok(Correlations {
        pearson: pearson(&xs, &ys)?,
        spearman: spearman(&xs, &ys)?,
        kendall: kendall(&xs, &ys)?,
        n: kept.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_ranks_for_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn constant_input_is_undefined() {
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[3.0, 3.0]).is_err());
        assert!(kendall(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn exclusion_list_drops_segments() {
        let pair = |id: &str, s, h| SegmentScorePair { segment_id: id.into(), system: s, human: h };
        let pairs = vec![pair("a", 1.0, 1.0), pair("b", 2.0, 2.0), pair("c", 3.0, 3.0), pair("x", 4.0, -9.0)];
        let c = segment_correlations(&pairs, &["x".to_string()]).unwrap();
        assert_eq!(c.n, 3);
        assert!((c.kendall - 1.0).abs() < 1e-12);
    }
}
