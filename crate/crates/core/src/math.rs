//! Small numeric helpers shared across modules.

use statrs::function::erf;

/// Standard normal CDF via the complementary error function (keeps full
/// relative precision in the left tail).
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `log(Phi(x))`, stable until erfc underflows (|x| ~ 37), with an
/// asymptotic fallback beyond that.
pub fn log_normal_cdf(x: f64) -> f64 {
    let c = erf::erfc(-x / std::f64::consts::SQRT_2);
    if c > 0.0 {
        (0.5 * c).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-x).ln()
            + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Deterministic 64-bit mix (splitmix64 finalizer) for sub-seed derivation.
#[inline]
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        let mut z = h ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Mean of a slice; NaN on empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than 2 points.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Non-overlapping batch-means standard error of the mean of a correlated
/// series, using `floor(sqrt(n))` batches.
pub fn batch_means_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return f64::NAN;
    }
    let k = (n as f64).sqrt().floor() as usize;
    let m = n / k;
    let means: Vec<f64> = (0..k)
        .map(|i| mean(&xs[i * m..(i + 1) * m]))
        .collect();
    let s2 = sample_variance(&means);
    (s2 / k as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_reference_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.0), 0.8413447460685429, epsilon = 1e-9);
        assert_relative_eq!(normal_cdf(-1.96), 0.024997895148220435, max_relative = 1e-9);
    }

    #[test]
    fn log_normal_cdf_tail() {
        // erfc keeps relative precision deep into the tail
        for &x in &[-5.0, -12.0, -30.0] {
            let via_cdf = log_normal_cdf(x);
            // Mills-ratio asymptote as an independent check
            let x2: f64 = x * x;
            let asymptote = -0.5 * x2 - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-x).ln();
            assert_relative_eq!(via_cdf, asymptote, max_relative = 2e-2);
        }
        assert!(log_normal_cdf(-40.0).is_finite());
        assert!(log_normal_cdf(-40.0) < log_normal_cdf(-39.0));
    }

    #[test]
    fn mix_seed_is_stable_and_order_sensitive() {
        assert_eq!(mix_seed(&[1, 2]), mix_seed(&[1, 2]));
        assert_ne!(mix_seed(&[1, 2]), mix_seed(&[2, 1]));
    }

    #[test]
    fn batch_means_se_shrinks_with_n() {
        // deterministic pseudo-noise
        let series: Vec<f64> = (0..10_000)
            .map(|i| ((i as f64 * 12.9898).sin() * 43758.5453).fract())
            .collect();
        let a = batch_means_se(&series[..1000]);
        let b = batch_means_se(&series);
        assert!(b < a);
    }
}
