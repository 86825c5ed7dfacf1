//! Reference-based quality proxies.

use std::collections::HashMap;
use std::hash::Hash;

fn counts<T: Eq + Hash + Clone>(items: &[T]) -> HashMap<T, usize> {
    let mut out = HashMap::new();
    for it in items {
        *out.entry(it.clone()).or_insert(0) += 1;
    }
    out
}

/// F1 between two token multisets. Two empty inputs score 1.
pub fn token_f1<T: Eq + Hash + Clone>(hyp: &[T], reference: &[T]) -> f64 {
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let h = counts(hyp);
    let r = counts(reference);
    let overlap: usize = h.iter().map(|(t, &c)| c.min(*r.get(t).unwrap_or(&0))).sum();
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / hyp.len() as f64;
    let rc = overlap as f64 / reference.len() as f64;
    2.0 * p * rc / (p + rc)
}

/// Token F1 over whitespace tokens.
pub fn quality_proxy(hyp: &str, reference: &str) -> f64 {
    let h: Vec<&str> = hyp.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    token_f1(&h, &r)
}

/// chrF: character n-gram F-beta (n = 1..=`max_n`, whitespace removed),
/// precision and recall averaged over the orders present in either side.
pub fn chrf(hyp: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if h == r {
        return 1.0;
    }
    let (mut prec, mut rec, mut orders) = (0.0, 0.0, 0);
    for n in 1..=max_n {
        let hg: Vec<&[char]> = h.windows(n).collect();
        let rg: Vec<&[char]> = r.windows(n).collect();
        if hg.is_empty() && rg.is_empty() {
            continue;
        }
        orders += 1;
        if hg.is_empty() || rg.is_empty() {
            continue;
        }
        let hc = counts(&hg);
        let rc = counts(&rg);
        let overlap: usize = hc.iter().map(|(g, &c)| c.min(*rc.get(g).unwrap_or(&0))).sum();
        prec += overlap as f64 / hg.len() as f64;
        rec += overlap as f64 / rg.len() as f64;
    }
    if orders == 0 {
        return 0.0;
    }
    let (p, r) = (prec / orders as f64, rec / orders as f64);
    let b2 = beta * beta;
    if p + r == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / (b2 * p + r)
    }
}
