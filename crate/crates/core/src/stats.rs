//! Summary statistics shared by the trajectory and MovieLens modules.

/// Five-number summary plus the mean; percentiles use the lower
/// nearest-rank convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub mean: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// Lower nearest-rank percentile of a sorted slice: the ceil(q*n)-th
/// smallest value.
pub fn percentile_nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).max(1).min(n);
    sorted[rank - 1]
}

pub fn five_number_summary(values: &[f64]) -> FiveNumber {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    FiveNumber {
        mean: mean(values),
        min: sorted[0],
        p25: percentile_nearest_rank(&sorted, 0.25),
        p50: percentile_nearest_rank(&sorted, 0.50),
        p75: percentile_nearest_rank(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n-1 denominator); zero for fewer than two
/// observations.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Standard error of the mean: sample std / sqrt(n).
pub fn standard_error(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sample_std(values) / (values.len() as f64).sqrt()
}

/// First differences x[i+1] - x[i].
pub fn first_differences(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Second differences x[i+2] - 2 x[i+1] + x[i].
pub fn second_differences(x: &[f64]) -> Vec<f64> {
    x.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect()
}

/// Centered moving average with the window truncated at the boundaries.
pub fn moving_average(x: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1);
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            mean(&x[lo..hi])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nearest_rank_matches_hand_computed_quartiles() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile_nearest_rank(&sorted, 0.25), 1.0);
        assert_eq!(percentile_nearest_rank(&sorted, 0.50), 2.0);
        assert_eq!(percentile_nearest_rank(&sorted, 0.75), 3.0);
        assert_eq!(percentile_nearest_rank(&sorted, 1.0), 4.0);
    }

    #[test]
    fn five_number_on_constant_input() {
        let s = five_number_summary(&[2.0, 2.0, 2.0]);
        assert_eq!(s.min, 2.0);
        assert_eq!(s.max, 2.0);
        assert_eq!(s.p50, 2.0);
        assert_eq!(s.mean, 2.0);
    }

    #[test]
    fn std_and_stderr() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(sample_std(&v), (5.0f64 / 3.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            standard_error(&v),
            (5.0f64 / 3.0).sqrt() / 2.0,
            epsilon = 1e-14
        );
        assert_eq!(sample_std(&[1.0]), 0.0);
    }

    #[test]
    fn differences_of_quadratic() {
        let x: Vec<f64> = (0..6).map(|k| (k * k) as f64).collect();
        assert_eq!(first_differences(&x), vec![1.0, 3.0, 5.0, 7.0, 9.0]);
        assert_eq!(second_differences(&x), vec![2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn moving_average_truncates_at_edges() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let sm = moving_average(&x, 5);
        assert_abs_diff_eq!(sm[0], 1.0, epsilon = 1e-14); // mean of 0,1,2
        assert_abs_diff_eq!(sm[2], 2.0, epsilon = 1e-14); // full window
        assert_abs_diff_eq!(sm[4], 3.0, epsilon = 1e-14); // mean of 2,3,4
    }
}
