/// Apportions `total` units proportionally to `weights` using the largest-remainder
/// rule. Ties among equal remainders go to the lowest index. The result always sums
/// to `total` when at least one weight is positive.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().filter(|w| **w > 0.0).sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let mut counts = Vec::with_capacity(weights.len());
    let mut remainders = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let exact = if w > 0.0 { total as f64 * w / sum } else { 0.0 };
        let floor = exact.floor();
        counts.push(floor as usize);
        remainders.push((exact - floor, i));
    }
    let assigned: usize = counts.iter().sum();
    if assigned > total {
        // only reachable through rounding in `total * w / sum`; trim from the smallest remainders
        let mut excess = assigned - total;
        remainders.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        for &(_, i) in &remainders {
            if excess == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
        return counts;
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_split() {
        assert_eq!(largest_remainder(1000, &[0.5, 0.3, 0.2]), vec![500, 300, 200]);
        assert_eq!(largest_remainder(100, &[0.2, 0.8]), vec![20, 80]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(largest_remainder(1, &[0.5, 0.5]), vec![1, 0]);
        assert_eq!(largest_remainder(2, &[1.0, 1.0, 1.0]), vec![1, 1, 0]);
    }

    #[test]
    fn zero_weight_gets_nothing() {
        assert_eq!(largest_remainder(3, &[0.0, 1.0, 1.0]), vec![0, 2, 1]);
    }

    proptest! {
        #[test]
        fn sums_to_total(total in 0usize..5000, ws in prop::collection::vec(0.0f64..1.0, 1..12)) {
            prop_assume!(ws.iter().any(|w| *w > 0.0));
            let c = largest_remainder(total, &ws);
            prop_assert_eq!(c.iter().sum::<usize>(), total);
            let s: f64 = ws.iter().sum();
            for (ci, wi) in c.iter().zip(&ws) {
                prop_assert!((*ci as f64 - total as f64 * wi / s).abs() < 1.0 + 1e-9);
            }
        }
    }
}
