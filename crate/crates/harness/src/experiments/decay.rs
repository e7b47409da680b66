use num_complex::Complex64;
use wigner_fluct::ensembles::{sample_wigner, EnsembleSpec, Symmetry};
use wigner_fluct::functions::TestFunction;
use wigner_fluct::matrixfn::{apply_function_entries_auto, resolvent_entries, FunctionPath, ResolventMethod, ResolventRequest};
use wigner_fluct::semicircle::{semicircle_expect, stieltjes_g, QuadratureRule};
use wigner_fluct::stats;

use crate::config::{DecayStatistic, ExperimentConfig};
use crate::replicas::{map_replicas, replica_seed};
use crate::result::{ExperimentResult, Regression, Statistic};
use crate::Result;

fn stat_name(s: DecayStatistic) -> &'static str {
    match s {
        DecayStatistic::TraceResolvent => "trace_resolvent_bias",
        DecayStatistic::OffdiagResolvent => "offdiag_resolvent_mean",
        DecayStatistic::EntryVariance => "entry_variance",
        DecayStatistic::DiagonalMean => "diagonal_mean_bias",
    }
}

type Point = (usize, f64, f64);

/// Per-replica spectral summaries.
struct SpectralDraw {
    trace_resolvent: Complex64,
    trace_f: f64,
    /// `tr_N X`, `tr_N X²`, `tr_N X³`.
    powers: [f64; 3],
    r12: Complex64,
}

/// Exact means of `tr_N X^k`, `k = 1, 2, 3`, at dimension `n`.
fn power_trace_means(spec: &EnsembleSpec, n: usize) -> [f64; 3] {
    let nf = n as f64;
    let sigma2 = spec.offdiag.variance();
    let diag2 = spec.diag.variance();
    // Only all-diagonal index triples survive in E tr X³.
    [0.0, ((nf - 1.0) * sigma2 + diag2) / nf, spec.diag.moment(3) / nf.powf(1.5)]
}

/// `|d|` and its delta-method standard error for a complex estimate `d` with
/// independent component errors.
fn modulus_with_stderr(d: Complex64, se_re: f64, se_im: f64) -> (f64, f64) {
    let r = d.norm();
    if r == 0.0 {
        return (0.0, se_re.hypot(se_im));
    }
    (r, ((d.re * se_re).powi(2) + (d.im * se_im).powi(2)).sqrt() / r)
}

/// Finite-N corrections over a range of dimensions with log-log slope fits.
pub fn run_decay(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let d = cfg.decay.clone().unwrap_or_default();
    let spec = &cfg.ensemble;
    let params = spec.params();
    let q = QuadratureRule::default_for(&params);
    let tol = &cfg.tolerances;
    let wanted = |s: DecayStatistic| d.statistics.contains(&s);
    let spectral_needed = [DecayStatistic::TraceResolvent, DecayStatistic::DiagonalMean, DecayStatistic::OffdiagResolvent]
        .into_iter()
        .any(wanted);
    let z = cfg.spectral_points().first().copied();
    let g = z.map(|z| stieltjes_g(z, &params)).transpose()?;
    let mean_integral = semicircle_expect(&d.mean_function, &q);
    let mut result = ExperimentResult::new(cfg);
    // (N, value, stderr) per statistic.
    let mut per_stat: Vec<(DecayStatistic, Vec<Point>)> = d.statistics.iter().map(|&s| (s, vec![])).collect();
    let mut push = |s: DecayStatistic, n: usize, v: f64, se: f64| {
        if let Some((_, xs)) = per_stat.iter_mut().find(|(k, _)| *k == s) {
            xs.push((n, v, se));
        }
    };

    for &n in &cfg.n {
        if spectral_needed {
            let label = format!("decay/spectral/n={n}");
            let draws: Vec<SpectralDraw> = map_replicas(d.spectral_replicas, cfg.parallel, |r| {
                let x = sample_wigner(spec, n, &replica_seed(cfg.master_seed, r, &label))?;
                let ev = x.eigenvalues()?;
                let nf = n as f64;
                let zz = z.map(|z| z.z).unwrap_or(Complex64::new(0.0, 1.0));
                let trace_resolvent = ev.iter().map(|&l| 1.0 / (zz - l)).sum::<Complex64>() / nf;
                let trace_f = ev.iter().map(|&l| d.mean_function.eval(l)).sum::<f64>() / nf;
                let powers = [1, 2, 3].map(|k| ev.iter().map(|l| l.powi(k)).sum::<f64>() / nf);
                let r12 = if wanted(DecayStatistic::OffdiagResolvent) {
                    let req = ResolventRequest { z: z.expect("validated point"), indices: vec![(0, 1)] };
                    resolvent_entries(&x, &req, ResolventMethod::Krylov)?[0]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                Ok(SpectralDraw { trace_resolvent, trace_f, powers, r12 })
            })?;
            result.seeds.labels.push(label);
            let controls: Vec<Vec<f64>> = (0..3).map(|k| draws.iter().map(|s| s.powers[k]).collect()).collect();
            // Controls constant up to rounding (tr X² for ±1 entries) would make the Gram matrix singular.
            let means = power_trace_means(spec, n);
            let usable: Vec<usize> =
                (0..3).filter(|&k| stats::variance(&controls[k]).sqrt() > 1e-10 * (1.0 + means[k].abs())).collect();
            let cv = |ys: &[f64]| {
                let c: Vec<Vec<f64>> = usable.iter().map(|&k| controls[k].clone()).collect();
                let mu: Vec<f64> = usable.iter().map(|&k| means[k]).collect();
                stats::control_variate_mean(ys, &c, &mu)
            };
            if wanted(DecayStatistic::TraceResolvent) {
                let g = g.expect("validated point");
                let (re, se_re) = cv(&draws.iter().map(|s| s.trace_resolvent.re).collect::<Vec<_>>())?;
                let (im, se_im) = cv(&draws.iter().map(|s| s.trace_resolvent.im).collect::<Vec<_>>())?;
                let (v, se) = modulus_with_stderr(Complex64::new(re, im) - g, se_re, se_im);
                push(DecayStatistic::TraceResolvent, n, v, se);
            }
            if wanted(DecayStatistic::DiagonalMean) {
                // Diagonal entries are exchangeable, so E f(X)₁₁ = E tr_N f(X).
                let (mean, se) = cv(&draws.iter().map(|s| s.trace_f).collect::<Vec<_>>())?;
                push(DecayStatistic::DiagonalMean, n, (mean - mean_integral).abs(), se);
            }
            if wanted(DecayStatistic::OffdiagResolvent) {
                let (re, se_re) = stats::mean_stderr(&draws.iter().map(|s| s.r12.re).collect::<Vec<_>>());
                let (im, se_im) = stats::mean_stderr(&draws.iter().map(|s| s.r12.im).collect::<Vec<_>>());
                let (v, se) = modulus_with_stderr(Complex64::new(re, im), se_re, se_im);
                push(DecayStatistic::OffdiagResolvent, n, v, se);
            }
        }
        if wanted(DecayStatistic::EntryVariance) {
            let f = cfg.function()?;
            let label = format!("decay/entries/n={n}");
            let m = cfg.m;
            let blocks = map_replicas(cfg.replicas, cfg.parallel, |r| {
                let x = sample_wigner(spec, n, &replica_seed(cfg.master_seed, r, &label))?;
                Ok(apply_function_entries_auto(&x, f, m)?)
            })?;
            result.seeds.labels.push(label);
            let fallbacks = blocks.iter().filter(|(_, p)| *p == FunctionPath::Spectral).count();
            result.statistics.push(Statistic::new("spectral_path_replicas", n, fallbacks as f64, 0.0, None));
            let mut ests = Vec::new();
            for i in 0..m {
                for j in i + 1..m {
                    let re = stats::variance_estimate(&blocks.iter().map(|(b, _)| b[(i, j)].re).collect::<Vec<_>>());
                    if spec.symmetry == Symmetry::Hermitian {
                        let im = stats::variance_estimate(&blocks.iter().map(|(b, _)| b[(i, j)].im).collect::<Vec<_>>());
                        ests.push((re.variance + im.variance, re.stderr.hypot(im.stderr)));
                    } else {
                        ests.push((re.variance, re.stderr));
                    }
                }
            }
            let k = ests.len() as f64;
            let v = ests.iter().map(|e| e.0).sum::<f64>() / k;
            let se = ests.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt() / k;
            push(DecayStatistic::EntryVariance, n, v, se);
        }
    }

    for (s, points) in per_stat {
        let name = stat_name(s);
        for &(n, v, se) in &points {
            result.statistics.push(Statistic::new(name, n, v, se, None));
        }
        let expected = s.expected_slope();
        let tolerance = if s == DecayStatistic::OffdiagResolvent { d.offdiag_slope_tolerance } else { tol.slope };
        if let Some(&(n, v, _)) = points.iter().find(|p| !(p.1 > 0.0)) {
            result.check(format!("{name} slope"), false, format!("value {v:e} at N={n} cannot be fitted on a log scale"));
            continue;
        }
        let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        let fit = stats::linear_fit(&xs, &ys)?;
        let ok = (fit.slope - expected).abs() <= tolerance;
        result.check(
            format!("{name} slope"),
            ok,
            format!("slope {:.3} (95% CI {:.3}..{:.3}), expected {expected} ± {tolerance}", fit.slope, fit.slope_ci.0, fit.slope_ci.1),
        );
        result.regressions.push(Regression {
            name: name.into(),
            ns: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
            stderrs: points.iter().map(|p| p.2).collect(),
            fit,
            expected_slope: expected,
            tolerance,
        });
    }
    Ok(result)
}
