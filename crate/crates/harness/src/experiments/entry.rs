use faer::{c64, Mat};
use num_complex::Complex64;
use wigner_fluct::ensembles::{sample_wigner, EntryClass, Symmetry};
use wigner_fluct::fluctlaw::{law_cdf, predict_entry_law, EntryFluctuationLaw, LawComponent};
use wigner_fluct::functionals;
use wigner_fluct::matrixfn::{apply_function_entries_auto, FunctionPath};
use wigner_fluct::semicircle::{semicircle_expect, QuadratureRule};
use wigner_fluct::stats;

use super::{compare, correlation_limit, ks_limit, max_cross_correlation, skewness};
use crate::config::{Centering, ExperimentConfig};
use crate::replicas::{map_replicas, replica_seed, tagged_path, write_csv, RawValue};
use crate::result::{ExperimentResult, KsCheck, Statistic};
use crate::{HarnessError, Result};

fn class_name(class: EntryClass) -> &'static str {
    match class {
        EntryClass::Diag => "diag",
        EntryClass::Offdiag => "offdiag",
    }
}

fn component_suffix(c: LawComponent) -> &'static str {
    match c {
        LawComponent::Value => "",
        LawComponent::Re => "_re",
        LawComponent::Im => "_im",
    }
}

/// Predicted functionals and entry laws, without sampling.
pub fn run_predict(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let f = cfg.function()?;
    let spec = &cfg.ensemble;
    let p = spec.params();
    let q = QuadratureRule::default_for(&p);
    let report = functionals::report(f, spec.offdiag.cumulants().2, &p, &q)?;
    let diag = predict_entry_law(f, spec, EntryClass::Diag, &q)?;
    let offdiag = predict_entry_law(f, spec, EntryClass::Offdiag, &q)?;
    let mut result = ExperimentResult::new(cfg);
    result.predictions = Some(serde_json::json!({
        "function": f,
        "functionals": report,
        "semicircle_integral": semicircle_expect(f, &q),
        "diag": { "law": diag, "variance": diag.total_variance() },
        "offdiag": { "law": offdiag, "variance": offdiag.total_variance() },
    }));
    for (name, v) in [("diag", diag.total_variance()), ("offdiag", offdiag.total_variance())] {
        result.check(format!("{name} variance"), v.is_finite() && v >= 0.0, format!("{v}"));
    }
    Ok(result)
}

/// One real series extracted from the replicas.
struct Series {
    i: usize,
    j: usize,
    class: EntryClass,
    component: LawComponent,
    values: Vec<f64>,
}

fn law_for(class: EntryClass, diag: &EntryFluctuationLaw, offdiag: &EntryFluctuationLaw) -> EntryFluctuationLaw {
    match class {
        EntryClass::Diag => *diag,
        EntryClass::Offdiag => *offdiag,
    }
}

/// `√N(f(X)_ij − centering)` over the top block, compared with the predicted entry laws.
pub fn run_entry_mc(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let f = cfg.function()?;
    let spec = &cfg.ensemble;
    let p = spec.params();
    let q = QuadratureRule::default_for(&p);
    let diag_law = predict_entry_law(f, spec, EntryClass::Diag, &q)?;
    let off_law = predict_entry_law(f, spec, EntryClass::Offdiag, &q)?;
    let integral = semicircle_expect(f, &q);
    let (m, reps, tol) = (cfg.m, cfg.replicas, &cfg.tolerances);
    let mut result = ExperimentResult::new(cfg);

    for &n in &cfg.n {
        let label = format!("entry_mc/n={n}");
        let blocks: Vec<(Mat<c64>, FunctionPath)> = map_replicas(reps, cfg.parallel, |r| {
            let x = sample_wigner(spec, n, &replica_seed(cfg.master_seed, r, &label))?;
            Ok(apply_function_entries_auto(&x, f, m)?)
        })?;
        result.seeds.labels.push(label);
        let spectral = blocks.iter().filter(|(_, path)| *path == FunctionPath::Spectral).count();
        result.statistics.push(Statistic::new("spectral_path_replicas", n, spectral as f64, 0.0, None));

        let sqrt_n = (n as f64).sqrt();
        let centre = |i: usize, j: usize| -> Complex64 {
            match cfg.centering {
                Centering::EmpiricalMean => blocks.iter().map(|(b, _)| b[(i, j)]).sum::<Complex64>() / reps as f64,
                Centering::SemicircleIntegral if i == j => Complex64::new(integral, 0.0),
                _ => Complex64::new(0.0, 0.0),
            }
        };
        let entries: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
        let centred: Vec<Vec<Complex64>> = entries
            .iter()
            .map(|&(i, j)| {
                let c = centre(i, j);
                blocks.iter().map(|(b, _)| sqrt_n * (b[(i, j)] - c)).collect()
            })
            .collect();

        if let Some(path) = &cfg.csv {
            let tag = (cfg.n.len() > 1).then(|| format!("n{n}"));
            let rows = (0..reps).flat_map(|r| {
                entries.iter().zip(&centred).map(move |(&(i, j), v)| RawValue { replica: r, i, j, value: v[r] })
            });
            write_csv(&tagged_path(path, tag.as_deref()), rows)?;
        }

        let mut series = Vec::new();
        for (&(i, j), v) in entries.iter().zip(&centred) {
            let class = if i == j { EntryClass::Diag } else { EntryClass::Offdiag };
            if class == EntryClass::Offdiag && spec.symmetry == Symmetry::Hermitian {
                series.push(Series { i, j, class, component: LawComponent::Re, values: v.iter().map(|z| z.re).collect() });
                series.push(Series { i, j, class, component: LawComponent::Im, values: v.iter().map(|z| z.im).collect() });
            } else {
                series.push(Series { i, j, class, component: LawComponent::Value, values: v.iter().map(|z| z.re).collect() });
            }
        }

        let mut groups: Vec<(EntryClass, LawComponent)> = series.iter().map(|s| (s.class, s.component)).collect();
        groups.dedup();
        groups.sort_by_key(|(c, k)| (*c as u8, *k as u8));
        groups.dedup();
        for (class, component) in groups {
            let law = law_for(class, &diag_law, &off_law);
            let predicted = law.component_variance(component)?;
            let members: Vec<&Series> = series.iter().filter(|s| s.class == class && s.component == component).collect();
            let ests: Vec<stats::VarianceEstimate> = members.iter().map(|s| stats::variance_estimate(&s.values)).collect();
            let k = ests.len() as f64;
            let pooled = ests.iter().map(|e| e.variance).sum::<f64>() / k;
            let se = ests.iter().map(|e| e.stderr.powi(2)).sum::<f64>().sqrt() / k;
            let suffix = format!("{}{}", class_name(class), component_suffix(component));
            let stat = Statistic::new(format!("variance/{suffix}"), n, pooled, se, Some(predicted));
            compare(&mut result, &stat, tol, tol.relative);
            result.statistics.push(stat);

            // Representative entry: (0,0) or (0,1).
            let rep = members[0];
            let (c, v) = law.component(component)?;
            let total = c * c * law.entry_marginal.variance() + v;
            let predicted_skew =
                if total > 0.0 { c.powi(3) * law.entry_marginal.cumulant(3)? / total.powf(1.5) } else { 0.0 };
            let m_f = rep.values.len() as f64;
            result.statistics.push(Statistic::new(
                format!("skewness/{suffix}"),
                n,
                skewness(&rep.values),
                (6.0 / m_f).sqrt(),
                Some(predicted_skew),
            ));
            if cfg.centering != Centering::EmpiricalMean {
                let (mean, mse) = stats::mean_stderr(&rep.values);
                result.statistics.push(Statistic::new(format!("mean/{suffix}"), n, mean, mse, Some(0.0)));
            }
            if total > 0.0 {
                let sorted = stats::sorted(&rep.values);
                let err = std::cell::OnceCell::new();
                let distance = stats::ks_statistic(&sorted, |t| match law_cdf(&law, t, component) {
                    Ok(v) => v.probability,
                    Err(e) => {
                        let _ = err.set(e);
                        f64::NAN
                    }
                });
                if let Some(e) = err.into_inner() {
                    return Err(HarnessError::Core(e));
                }
                let threshold = ks_limit(tol, reps);
                let name = format!("ks/{suffix}");
                result.check(
                    format!("{name} (N={n})"),
                    distance <= threshold,
                    format!("entry ({},{}): KS {distance:.4} (limit {threshold:.4})", rep.i, rep.j),
                );
                result.ks.push(KsCheck { name, n, replicas: reps, distance, threshold });
            }
        }

        let keyed: Vec<((usize, usize), Vec<f64>)> = series.into_iter().map(|s| ((s.i, s.j), s.values)).collect();
        if keyed.len() > 1 {
            let worst = max_cross_correlation(&keyed, |a, b| a != b);
            let limit = correlation_limit(tol, reps);
            result.statistics.push(Statistic::new("max_cross_correlation", n, worst, 0.0, None));
            result.check(format!("cross-entry correlation (N={n})"), worst <= limit, format!("max |corr| {worst:.4} (limit {limit:.4})"));
        }
    }
    Ok(result)
}
