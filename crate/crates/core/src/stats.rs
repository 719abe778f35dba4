//! Small order-statistic helpers shared by the preprocessing and engine code.

/// Sorts a copy of `values` ascending. NaNs are not expected.
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of already sorted data with linear interpolation between order
/// statistics (position `p·(n−1)`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile_sorted(&sorted(values), 0.5)
}

/// Interpolated first and third quartiles.
pub fn quartiles(values: &[f64]) -> (f64, f64) {
    let s = sorted(values);
    (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75))
}

/// Quartiles that are always actual order statistics: the lower neighbour of
/// position `0.25·(n−1)` and the upper neighbour of position `0.75·(n−1)`.
///
/// Clamping values beyond fences derived from these quartiles never moves
/// the quartiles themselves, which keeps winsorization idempotent.
pub fn order_stat_quartiles(values: &[f64]) -> (f64, f64) {
    let s = sorted(values);
    let n = s.len() - 1;
    let q1 = s[(0.25 * n as f64).floor() as usize];
    let q3 = s[(0.75 * n as f64).ceil() as usize];
    (q1, q3)
}

/// Mean of the values lying inside the interpolated interquartile range.
pub fn interquartile_mean(values: &[f64]) -> f64 {
    let (q1, q3) = quartiles(values);
    let (sum, count) = values
        .iter()
        .filter(|&&v| v >= q1 && v <= q3)
        .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
    if count == 0 {
        // Only reachable through rounding in the interpolation; fall back to the median.
        median(values)
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 3.0, 5.0]), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn interpolated_quartiles() {
        let (q1, q3) = quartiles(&[0.2, 0.4, 0.6, 0.8]);
        assert!((q1 - 0.35).abs() < 1e-12);
        assert!((q3 - 0.65).abs() < 1e-12);
    }

    #[test]
    fn order_stat_quartiles_are_members() {
        let v = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 10.0];
        let (q1, q3) = order_stat_quartiles(&v);
        assert_eq!(q1, 0.0);
        assert_eq!(q3, 10.0);
    }
}
