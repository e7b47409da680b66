use faer::Mat;
use num_complex::Complex64;
use wigner_fluct::ensembles::{sample_wigner, EntryClass};
use wigner_fluct::fluctlaw::ResolventFieldLaw;
use wigner_fluct::matrixfn::schur_field;
use wigner_fluct::semicircle::stieltjes_g;
use wigner_fluct::stats;

use super::{compare, correlation_limit, is_degenerate, max_cross_correlation};
use crate::config::{Centering, ExperimentConfig};
use crate::replicas::{map_replicas, replica_seed, tagged_path, write_csv, RawValue};
use crate::result::{ExperimentResult, Statistic};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    /// `√N(R_ij(z) − g(z)δ_ij)` read off the Schur corner.
    Resolvent,
    /// `Y_N(z)`.
    Schur,
}

/// Covariances of `√N(R_ij(z) − g(z)δ_ij)` against `g²(z)g²(w)(entry term + Y covariance)`.
pub fn run_resolvent_field(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_field(cfg, Field::Resolvent)
}

/// Covariances of `Y_N(z)` against the quadratic-form limit.
pub fn run_schur_field(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_field(cfg, Field::Schur)
}

fn component_name(k: usize) -> String {
    format!("{}{}", if k % 2 == 0 { "re" } else { "im" }, k / 2)
}

fn run_field(cfg: &ExperimentConfig, field: Field) -> Result<ExperimentResult> {
    let spec = &cfg.ensemble;
    let params = spec.params();
    let points = cfg.spectral_points();
    let gs = points.iter().map(|&z| stieltjes_g(z, &params)).collect::<std::result::Result<Vec<_>, _>>()?;
    let (m, reps, tol) = (cfg.m, cfg.replicas, &cfg.tolerances);
    let kind = match field {
        Field::Resolvent => "resolvent_field",
        Field::Schur => "schur_field",
    };
    let mut result = ExperimentResult::new(cfg);
    let entries: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();

    for &n in &cfg.n {
        let label = format!("{kind}/n={n}");
        let sqrt_n = (n as f64).sqrt();
        // Per replica: one m × m block per point.
        let draws: Vec<Vec<Mat<Complex64>>> = map_replicas(reps, cfg.parallel, |r| {
            let x = sample_wigner(spec, n, &replica_seed(cfg.master_seed, r, &label))?;
            let sf = schur_field(&x, &points, m, &params, cfg.method)?;
            Ok(match field {
                Field::Schur => sf.y,
                Field::Resolvent => sf.corner.into_iter().map(|c| Mat::from_fn(m, m, |i, j| sqrt_n * c[(i, j)])).collect(),
            })
        })?;
        result.seeds.labels.push(label);

        // Values per (entry, point), centred for reporting; covariances use sample means regardless.
        let values: Vec<Vec<Vec<Complex64>>> = entries
            .iter()
            .map(|&(i, j)| {
                (0..points.len())
                    .map(|t| {
                        let raw: Vec<Complex64> = draws.iter().map(|d| d[t][(i, j)]).collect();
                        let c = match (cfg.centering, field) {
                            (Centering::EmpiricalMean, _) => raw.iter().sum::<Complex64>() / reps as f64,
                            (Centering::SemicircleIntegral, Field::Resolvent) if i == j => sqrt_n * gs[t],
                            _ => Complex64::new(0.0, 0.0),
                        };
                        raw.into_iter().map(|v| v - c).collect()
                    })
                    .collect()
            })
            .collect();

        if let Some(path) = &cfg.csv {
            for t in 0..points.len() {
                let tag = match (cfg.n.len() > 1, points.len() > 1) {
                    (false, false) => None,
                    (true, false) => Some(format!("n{n}")),
                    (false, true) => Some(format!("p{t}")),
                    (true, true) => Some(format!("n{n}.p{t}")),
                };
                let rows = (0..reps).flat_map(|r| {
                    entries.iter().zip(&values).map(move |(&(i, j), v)| RawValue { replica: r, i, j, value: v[t][r] })
                });
                write_csv(&tagged_path(path, tag.as_deref()), rows)?;
            }
        }

        for (class, (i, j)) in [(EntryClass::Diag, (0, 0)), (EntryClass::Offdiag, (0, 1))] {
            if j >= m {
                continue;
            }
            let law = ResolventFieldLaw::new(*spec, class, points.clone())?;
            let cov = match field {
                Field::Schur => law.y_covariance()?,
                Field::Resolvent => law.upsilon_covariance()?,
            };
            let e = entries.iter().position(|&k| k == (i, j)).expect("entry in block");
            let series: Vec<Vec<f64>> = (0..2 * points.len())
                .map(|k| values[e][k / 2].iter().map(|v| if k % 2 == 0 { v.re } else { v.im }).collect())
                .collect();
            let cname = if class == EntryClass::Diag { "diag" } else { "offdiag" };
            for a in 0..series.len() {
                for b in a..series.len() {
                    let predicted = cov[(a, b)];
                    // Components that vanish identically (real matrices, or Hermitian diagonals, at real points) carry no information.
                    if (is_degenerate(&series[a]) || is_degenerate(&series[b])) && predicted.abs() <= super::ZERO_PREDICTION {
                        continue;
                    }
                    let est = stats::covariance_estimate(&series[a], &series[b]);
                    let name = format!("cov/{cname}/{},{}", component_name(a), component_name(b));
                    let stat = Statistic::new(name, n, est.variance, est.stderr, Some(predicted));
                    compare(&mut result, &stat, tol, tol.relative);
                    result.statistics.push(stat);
                }
            }
        }

        let keyed: Vec<((usize, usize), Vec<f64>)> = entries
            .iter()
            .zip(&values)
            .flat_map(|(&e, per_point)| {
                per_point.iter().flat_map(move |v| {
                    [(e, v.iter().map(|z| z.re).collect()), (e, v.iter().map(|z| z.im).collect())]
                })
            })
            .collect();
        if entries.len() > 1 {
            let worst = max_cross_correlation(&keyed, |a, b| a != b);
            let limit = correlation_limit(tol, reps);
            result.statistics.push(Statistic::new("max_cross_correlation", n, worst, 0.0, None));
            result.check(format!("cross-entry correlation (N={n})"), worst <= limit, format!("max |corr| {worst:.4} (limit {limit:.4})"));
        }
    }
    Ok(result)
}
