/// Weighted median of scalar values.
///
/// Sorts by value and returns the first value at which the cumulative
/// weight reaches half the total. When the cumulative weight equals half
/// exactly, returns the midpoint with the next positively weighted value.
/// Zero-weight entries are ignored. Returns `None` if no weight is positive.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> Option<f64> {
    debug_assert_eq!(values.len(), weights.len());
    let mut pairs: Vec<(f64, f64)> =
        values.iter().zip(weights).filter(|(_, &w)| w > 0.0).map(|(&v, &w)| (v, w)).collect();
    if pairs.is_empty() {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum equal values first so the tie test does not depend on input order.
    let mut grouped: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
    for (v, w) in pairs {
        match grouped.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => grouped.push((v, w)),
        }
    }
    let total: f64 = grouped.iter().map(|p| p.1).sum();
    let half = 0.5 * total;
    let mut cumulative = 0.0;
    for (j, &(v, w)) in grouped.iter().enumerate() {
        cumulative += w;
        if cumulative == half {
            if let Some(&(next, _)) = grouped.get(j + 1) {
                return Some(0.5 * (v + next));
            }
            return Some(v);
        }
        if cumulative > half {
            return Some(v);
        }
    }
    grouped.last().map(|p| p.0)
}
