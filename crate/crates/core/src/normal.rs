//! Standard normal distribution function.

use statrs::function::erf::erfc;

/// `Phi(x)`, accurate in both tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 - Phi(x)` without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        // mpmath: 0.5 * erfc(2.272 / sqrt(2))
        assert!((std_normal_sf(2.272) - 0.011543_f64).abs() < 5e-6);
        assert!((std_normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-10);
        assert!((std_normal_cdf(3.0) - 0.998_650_101_968_369_9).abs() < 1e-10);
        assert!((std_normal_sf(8.0) - 6.220_960_574_271_785e-16).abs() < 1e-24);
    }

    #[test]
    fn symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in -400..=400 {
            let x = i as f64 * 0.02;
            let p = std_normal_cdf(x);
            assert!((p + std_normal_cdf(-x) - 1.0).abs() < 1e-15);
            assert!(p >= prev);
            prev = p;
        }
    }
}
