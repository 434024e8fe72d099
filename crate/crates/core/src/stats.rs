//! Small statistics helpers shared by the estimators.

/// 95% two-sided normal quantile used for all confidence intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Pairwise (cascade) summation.
///
/// Associativity is fixed by the input order, so aggregates computed from a
/// per-sample buffer are identical no matter how many worker threads produced
/// the buffer. Also keeps rounding error at O(log n) ulps.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean via pairwise summation. Empty input yields 0.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// (mean, unbiased sample variance) via a deterministic two-pass scheme.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (mean(xs), 0.0);
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (m, pairwise_sum(&sq) / (n - 1) as f64)
}

/// Wilson score interval for a binomial proportion.
///
/// Well-behaved at the extremes: with zero hits the lower bound is 0 and the
/// upper bound is z^2/(n + z^2) > 0, so rare-event rows never degenerate.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0, "wilson_interval needs at least one sample");
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let margin = (z / n) * (n * p * (1.0 - p) + z2 / 4.0).sqrt();
    // At the extremes center == margin algebraically; compute the bound as an
    // exact 0 or 1 rather than leaving rounding residue of order 1e-19.
    let lo = if hits == 0 {
        0.0
    } else {
        ((center - margin) / denom).clamp(0.0, 1.0)
    };
    let hi = if p == 1.0 {
        1.0
    } else {
        ((center + margin) / denom).clamp(0.0, 1.0)
    };
    (lo, hi)
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    assert!(sxx > 0.0, "degenerate abscissae in linear fit");
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of log(y) against log(x); requires strictly positive data.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64 / 7.0).collect();
        let naive: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), naive, max_relative = 1e-14);
    }

    #[test]
    fn pairwise_is_order_of_evaluation_free() {
        // The result is a pure function of the buffer, computed single-threaded.
        let xs: Vec<f64> = (0..10_000)
            .map(|i| ((i * 37) % 101) as f64 * 1e-3)
            .collect();
        assert_eq!(pairwise_sum(&xs).to_bits(), pairwise_sum(&xs).to_bits());
    }

    #[test]
    fn wilson_zero_hits_has_positive_upper_bound() {
        let (lo, hi) = wilson_interval(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn wilson_matches_hand_computed_value() {
        // Oracle: direct evaluation of the closed form for hits=10, n=100, z=1.96.
        let z: f64 = 1.96;
        let (lo, hi) = wilson_interval(10, 100, z);
        let p = 0.1_f64;
        let n = 100.0_f64;
        let denom = 1.0 + z * z / n;
        let center = p + z * z / (2.0 * n);
        let margin = (z / n) * (n * p * (1.0 - p) + z * z / 4.0).sqrt();
        assert_relative_eq!(lo, (center - margin) / denom, max_relative = 1e-12);
        assert_relative_eq!(hi, (center + margin) / denom, max_relative = 1e-12);
        assert!(lo < p && p < hi);
    }

    #[test]
    fn wilson_interval_tightens_with_n() {
        let (lo1, hi1) = wilson_interval(50, 500, Z95);
        let (lo2, hi2) = wilson_interval(100, 1000, Z95);
        assert!(hi2 - lo2 < hi1 - lo1);
    }

    #[test]
    fn loglog_slope_recovers_power_law() {
        let xs = [1.0f64, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.0)).collect();
        assert_relative_eq!(loglog_slope(&xs, &ys), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_and_variance_match_two_point_case() {
        let (m, v) = mean_and_variance(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(v, 2.0);
    }
}
