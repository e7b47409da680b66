//! Experiment runners, one per [`ExperimentKind`].

mod decay;
mod entry;
mod fields;
mod forms;
mod hs;

use std::time::Instant;

use wigner_fluct::stats;

use crate::config::{ExperimentConfig, ExperimentKind, Tolerances};
use crate::result::{ExperimentResult, Statistic};
use crate::Result;

pub use decay::run_decay;
pub use entry::{run_entry_mc, run_predict};
pub use fields::{run_resolvent_field, run_schur_field};
pub use forms::{run_decoupling, run_qf_clt};
pub use hs::run_hs_check;

/// Predictions smaller than this are treated as exact zeros and tested by z-score.
pub const ZERO_PREDICTION: f64 = 1e-9;

/// Estimates with zero spread must match a zero prediction to this accuracy.
pub const EXACT_ZERO: f64 = 1e-12;

/// Validates `cfg`, runs it and stamps the wall time.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut result = match cfg.kind {
        ExperimentKind::Predict => run_predict(cfg),
        ExperimentKind::EntryMc => run_entry_mc(cfg),
        ExperimentKind::ResolventField => run_resolvent_field(cfg),
        ExperimentKind::SchurField => run_schur_field(cfg),
        ExperimentKind::QfClt => run_qf_clt(cfg),
        ExperimentKind::Decoupling => run_decoupling(cfg),
        ExperimentKind::Decay => run_decay(cfg),
        ExperimentKind::HsCheck => run_hs_check(cfg),
    }?;
    result.wall_time_s = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Relative agreement for a nonzero prediction, `|z| ≤ z_max` for a vanishing one.
fn compare(result: &mut ExperimentResult, stat: &Statistic, tol: &Tolerances, relative: f64) {
    let Some(p) = stat.predicted else {
        return;
    };
    let name = format!("{} (N={})", stat.name, stat.n);
    if p.abs() > ZERO_PREDICTION {
        let rel = (stat.estimate - p).abs() / p.abs();
        result.check(name, rel <= relative, format!("estimate {:.6} vs {p:.6}: relative error {rel:.4} (limit {relative})", stat.estimate));
    } else if stat.stderr > 0.0 {
        let z = stat.z_score.unwrap_or(f64::INFINITY);
        result.check(name, z.abs() <= tol.z_max, format!("estimate {:.3e} ± {:.3e}: z = {z:.3} (limit {})", stat.estimate, stat.stderr, tol.z_max));
    } else {
        let ok = stat.estimate.abs() <= EXACT_ZERO;
        result.check(name, ok, format!("degenerate estimate {:.3e} against an exact zero", stat.estimate));
    }
}

fn ks_limit(tol: &Tolerances, replicas: usize) -> f64 {
    tol.ks_max.unwrap_or_else(|| stats::ks_threshold(replicas))
}

fn correlation_limit(tol: &Tolerances, replicas: usize) -> f64 {
    tol.correlation_max.unwrap_or(3.0 / (replicas as f64).sqrt())
}

/// Spread below which an O(1) rescaled series counts as identically constant.
const ROUND_OFF_SPREAD: f64 = 1e-9;

fn is_degenerate(xs: &[f64]) -> bool {
    stats::variance(xs).sqrt() <= ROUND_OFF_SPREAD
}

/// Largest `|corr|` over pairs of series accepted by `distinct`; degenerate series are skipped.
fn max_cross_correlation<K>(series: &[(K, Vec<f64>)], distinct: impl Fn(&K, &K) -> bool) -> f64 {
    let varying: Vec<&(K, Vec<f64>)> = series.iter().filter(|(_, v)| !is_degenerate(v)).collect();
    let mut worst = 0.0f64;
    for a in 0..varying.len() {
        for b in a + 1..varying.len() {
            if distinct(&varying[a].0, &varying[b].0) {
                worst = worst.max(stats::correlation(&varying[a].1, &varying[b].1).abs());
            }
        }
    }
    worst
}

fn skewness(xs: &[f64]) -> f64 {
    let m = stats::mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    if m2 == 0.0 {
        0.0
    } else {
        m3 / m2.powf(1.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn compare_branches() {
        let cfg = ExperimentConfig::preset(ExperimentKind::EntryMc);
        let tol = Tolerances::default();
        let mut r = ExperimentResult::new(&cfg);
        compare(&mut r, &Statistic::new("a", 10, 5.2, 0.1, Some(5.0)), &tol, 0.1);
        compare(&mut r, &Statistic::new("b", 10, 5.6, 0.1, Some(5.0)), &tol, 0.1);
        compare(&mut r, &Statistic::new("c", 10, 0.02, 0.01, Some(0.0)), &tol, 0.1);
        compare(&mut r, &Statistic::new("d", 10, 0.04, 0.01, Some(0.0)), &tol, 0.1);
        compare(&mut r, &Statistic::new("e", 10, 0.0, 0.0, Some(0.0)), &tol, 0.1);
        compare(&mut r, &Statistic::new("f", 10, 1e-3, 0.0, Some(0.0)), &tol, 0.1);
        compare(&mut r, &Statistic::new("g", 10, 1.0, 0.0, None), &tol, 0.1);
        let passed: Vec<bool> = r.checks.iter().map(|c| c.passed).collect();
        assert_eq!(passed, [true, false, true, false, true, false]);
    }

    #[test]
    fn skewness_of_symmetric_and_skewed_samples() {
        assert_eq!(skewness(&[-1.0, 1.0, -1.0, 1.0]), 0.0);
        // Two-point law with P(1) = 1/4 on {0, 1}: skewness (1 − 2p)/√(p(1−p)).
        let xs = [1.0, 0.0, 0.0, 0.0];
        approx::assert_relative_eq!(skewness(&xs), 0.5 / (0.1875f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn cross_correlation_skips_same_key_and_constants() {
        let s = vec![
            (0, vec![1.0, 2.0, 3.0, 4.0]),
            (0, vec![2.0, 4.0, 6.0, 8.1]),
            (1, vec![4.0, 3.0, 2.0, 1.5]),
            (2, vec![7.0; 4]),
            // round-off noise, perfectly correlated with key 0
            (3, vec![1e-16, 2e-16, 3e-16, 4e-16]),
        ];
        let c = max_cross_correlation(&s, |a, b| a != b);
        assert!(c > 0.9 && c < 1.0, "{c}");
        let c_same = max_cross_correlation(&s[..2], |a, b| a != b);
        assert_eq!(c_same, 0.0);
    }
}
