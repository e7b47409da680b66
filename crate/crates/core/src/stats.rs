//! Sample statistics used to confront Monte Carlo output with predictions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Asymptotic Kolmogorov critical value at level 0.01.
pub const KS_CRITICAL_001: f64 = 1.63;

/// Allowance for the `O(N^{-1/2})` distance between finite-N and limiting laws.
pub const KS_FINITE_N_SLACK: f64 = 1.5;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample variance with its standard error `√((m₄ − s⁴)/n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub stderr: f64,
}

pub fn variance_estimate(xs: &[f64]) -> VarianceEstimate {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d2 = (x - m).powi(2);
        m2 += d2;
        m4 += d2 * d2;
    }
    let (m2, m4) = (m2 / n, m4 / n);
    VarianceEstimate { variance: m2 * n / (n - 1.0), stderr: ((m4 - m2 * m2).max(0.0) / n).sqrt() }
}

/// Sample mean with its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    (mean(xs), (variance(xs) / xs.len() as f64).sqrt())
}

/// Covariance estimate with the standard error of the mean of centered products.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> VarianceEstimate {
    let (mx, my) = (mean(xs), mean(ys));
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let n = prods.len() as f64;
    let (c, se) = mean_stderr(&prods);
    VarianceEstimate { variance: c * n / (n - 1.0), stderr: se }
}

/// Pearson correlation; zero when either sample is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// `sup |F_M − F|` over a sorted sample, exact at the jump points.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let m = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (k, &x)| {
        let f = cdf(x);
        d.max((k as f64 + 1.0) / m - f).max(f - k as f64 / m)
    })
}

pub fn ks_threshold(samples: usize) -> f64 {
    KS_CRITICAL_001 / (samples as f64).sqrt() * KS_FINITE_N_SLACK
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Ordinary least squares `y = intercept + slope·x` with a two-sided 95% interval on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub slope_ci: (f64, f64),
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::InvalidParameter(format!("regression needs at least 3 paired points, got {n}")));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("regression abscissae are all equal".into()));
    }
    let slope = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = (n - 2) as f64;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Numeric(e.to_string()))?.inverse_cdf(0.975);
    Ok(LinearFit { slope, intercept, slope_stderr: se, slope_ci: (slope - t * se, slope + t * se) })
}

/// Weighted least squares with weights `1/σ_k²`; the slope error is propagated from the
/// supplied per-point errors rather than from the residuals.
pub fn weighted_linear_fit(xs: &[f64], ys: &[f64], sds: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n || sds.len() != n || sds.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("weighted regression needs positive errors for every point".into()));
    }
    let w: Vec<f64> = sds.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(xs).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let slope = w.iter().zip(xs.iter().zip(ys)).map(|(w, (x, y))| w * (x - mx) * (y - my)).sum::<f64>() / sxx;
    let se = (1.0 / sxx).sqrt();
    Ok(LinearFit { slope, intercept: my - slope * mx, slope_stderr: se, slope_ci: (slope - 1.96 * se, slope + 1.96 * se) })
}

/// Mean of `ys` adjusted by control variates `controls[k]` whose exact means are `means[k]`.
///
/// The coefficients come from the least-squares regression of `ys` on the controls; the
/// standard error is that of the regression intercept at the known means.
pub fn control_variate_mean(ys: &[f64], controls: &[Vec<f64>], means: &[f64]) -> Result<(f64, f64)> {
    let n = ys.len();
    let k = controls.len();
    if means.len() != k || controls.iter().any(|c| c.len() != n) || n < k + 2 {
        return Err(Error::InvalidParameter(format!("{k} controls need as many means and more than {} samples", k + 1)));
    }
    let my = mean(ys);
    let mc: Vec<f64> = controls.iter().map(|c| mean(c)).collect();
    let gram = faer::Mat::<f64>::from_fn(k, k, |a, b| {
        controls[a].iter().zip(&controls[b]).map(|(x, y)| (x - mc[a]) * (y - mc[b])).sum()
    });
    let rhs = faer::Mat::<f64>::from_fn(k, 1, |a, _| controls[a].iter().zip(ys).map(|(x, y)| (x - mc[a]) * (y - my)).sum());
    let coef = if k == 0 { faer::Mat::zeros(0, 1) } else { faer::linalg::solvers::Solve::solve(&gram.partial_piv_lu(), rhs.as_ref()) };
    if (0..k).any(|a| !coef[(a, 0)].is_finite()) {
        return Err(Error::Numeric("control variates are collinear".into()));
    }
    let estimate = my - (0..k).map(|a| coef[(a, 0)] * (mc[a] - means[a])).sum::<f64>();
    let rss: f64 = (0..n)
        .map(|r| {
            let fit = my + (0..k).map(|a| coef[(a, 0)] * (controls[a][r] - mc[a])).sum::<f64>();
            (ys[r] - fit).powi(2)
        })
        .sum();
    Ok((estimate, (rss / (n - k - 1) as f64 / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{Marginal, SeedDerivation};
    use crate::normal;
    use approx::assert_relative_eq;

    #[test]
    fn ks_optimal_placement() {
        let m = 200;
        // quantiles of the uniform law at (k − ½)/M
        let xs: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
        assert_relative_eq!(ks_statistic(&xs, |x| x.clamp(0.0, 1.0)), 0.5 / m as f64, epsilon = 1e-15);
        assert_relative_eq!(ks_statistic(&[0.0], normal::cdf), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ks_normal_draws_within_critical_value() {
        let mut rng = SeedDerivation::new(11, 0, "ks").rng();
        let d = Marginal::standard_gaussian();
        let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let ks = ks_statistic(&sorted(&xs), normal::cdf);
        assert!(ks <= KS_CRITICAL_001 / (xs.len() as f64).sqrt(), "{ks}");
    }

    #[test]
    fn variance_estimate_of_two_point_sample() {
        let xs = [1.0, -1.0, 1.0, -1.0];
        let v = variance_estimate(&xs);
        assert_relative_eq!(v.variance, 4.0 / 3.0, epsilon = 1e-15);
        // m₄ − m₂² = 0
        assert_eq!(v.stderr, 0.0);
    }

    #[test]
    fn correlation_extremes() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert_relative_eq!(correlation(&xs, &ys), 1.0, epsilon = 1e-15);
        assert_relative_eq!(correlation(&xs, &[8.0, 6.0, 4.0, 2.0]), -1.0, epsilon = 1e-15);
        assert_eq!(correlation(&xs, &[1.0; 4]), 0.0);
    }

    #[test]
    fn regression_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 1.5 * x).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -1.5, epsilon = 1e-14);
        assert_relative_eq!(fit.intercept, 2.0, epsilon = 1e-14);
        assert!(fit.slope_stderr < 1e-12);
        let wfit = weighted_linear_fit(&xs, &ys, &[0.1, 0.2, 0.1, 0.3]).unwrap();
        assert_relative_eq!(wfit.slope, -1.5, epsilon = 1e-13);
    }

    #[test]
    fn control_variates_remove_the_explained_part() {
        let mut rng = SeedDerivation::new(12, 0, "cv").rng();
        let d = Marginal::standard_gaussian();
        let n = 4000;
        let c: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let e: Vec<f64> = (0..n).map(|_| 0.1 * d.sample(&mut rng)).collect();
        let ys: Vec<f64> = c.iter().zip(&e).map(|(c, e)| 2.0 + 3.0 * c + e).collect();
        let (est, se) = control_variate_mean(&ys, std::slice::from_ref(&c), &[0.0]).unwrap();
        assert!((est - 2.0).abs() <= 5.0 * se, "{est} ± {se}");
        // Residual scale 0.1 instead of √10.
        assert_relative_eq!(se, 0.1 / (n as f64).sqrt(), max_relative = 0.1);
        let (plain, plain_se) = control_variate_mean(&ys, &[], &[]).unwrap();
        assert_relative_eq!(plain, mean(&ys), epsilon = 1e-14);
        assert_relative_eq!(plain_se, mean_stderr(&ys).1, max_relative = 1e-12);
    }

    #[test]
    fn regression_interval_uses_student_quantile() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.1, 0.9, 2.2, 2.8, 4.1];
        let fit = linear_fit(&xs, &ys).unwrap();
        // t_{0.975, 3} = 3.182446
        assert_relative_eq!((fit.slope_ci.1 - fit.slope) / fit.slope_stderr, 3.182446305284263, epsilon = 1e-6);
    }
}
