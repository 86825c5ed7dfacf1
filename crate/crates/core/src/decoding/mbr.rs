/// Index of the candidate with the highest mean utility against every other
/// candidate. Ties go to the lowest index. `None` only for an empty slice.
pub fn mbr_decode<T, F>(candidates: &[T], utility: F) -> Option<usize>
where
    F: Fn(&T, &T) -> f64,
{
    if candidates.len() <= 1 {
        return (!candidates.is_empty()).then_some(0);
    }
    let others = (candidates.len() - 1) as f64;
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let expected = candidates
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, other)| utility(c, other))
            .sum::<f64>()
            / others;
        if best.is_none_or(|(_, b)| expected > b) {
            best = Some((i, expected));
        }
    }
    best.map(|(i, _)| i)
}
