//! Standard normal distribution helpers.

use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF Φ.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// CDF of N(0, variance) at `t`; `variance == 0` is the point mass at zero.
pub fn cdf_with_variance(t: f64, variance: f64) -> f64 {
    if variance > 0.0 {
        cdf(t / variance.sqrt())
    } else if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        assert_relative_eq!(cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(cdf(1.959963984540054), 0.975, epsilon = 1e-11);
        assert_relative_eq!(cdf(-2.0) + cdf(2.0), 1.0, epsilon = 1e-15);
        assert_eq!(cdf_with_variance(0.0, 0.0), 1.0);
    }

    #[test]
    fn lower_tail_keeps_relative_accuracy() {
        // Φ(−5), Φ(−8), Φ(−20) to 16 digits.
        assert_relative_eq!(cdf(-5.0), 2.866515718791939e-7, max_relative = 1e-12);
        assert_relative_eq!(cdf(-8.0), 6.220960574271785e-16, max_relative = 1e-12);
        assert_relative_eq!(cdf(-20.0), 2.753624118606233e-89, max_relative = 1e-12);
    }
}
