use wigner_fluct::cltcore::{decoupling_check, qf_clt_experiment, ExpectationMode, QuadraticFormSpec};
use wigner_fluct::ensembles::{Marginal, SeedDerivation};
use wigner_fluct::fluctlaw::LawComponent;

use super::{compare, correlation_limit, ks_limit, EXACT_ZERO};
use crate::config::{DecouplingCriterion, ExperimentConfig};
use crate::result::{ExperimentResult, KsCheck, Statistic, Table};
use crate::{HarnessError, Result};

/// Label of the core quadratic-form sampler's streams.
const QF_LABEL: &str = "qf-clt";

fn component_tag(c: LawComponent) -> &'static str {
    match c {
        LawComponent::Value => "",
        LawComponent::Re => "/re",
        LawComponent::Im => "/im",
    }
}

/// `N^{-1/2}(⟨u_p, M u_q⟩ − δ_pq Tr M)` against its Gaussian limit.
pub fn run_qf_clt(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let qf = cfg.qf.clone().unwrap_or_default();
    let n = cfg.n[0];
    let matrix = qf.matrix.build(n);
    let spec = QuadraticFormSpec::block_diagonal(qf.field, vec![matrix; qf.blocks])?;
    let experiment = || qf_clt_experiment(&spec, &qf.coordinates, cfg.replicas, cfg.master_seed);
    let report = if cfg.parallel {
        experiment()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(experiment)?
    };
    let tol = &cfg.tolerances;
    let mut result = ExperimentResult::new(cfg);
    result.seeds.labels.push(QF_LABEL.into());
    for c in &report.components {
        let name = format!("variance/g{}{}{}", c.p, c.q, component_tag(c.component));
        let stat = Statistic::new(name.clone(), n, c.variance.variance, c.variance.stderr, Some(c.predicted_variance));
        result.statistics.push(Statistic::new(
            format!("mean/g{}{}{}", c.p, c.q, component_tag(c.component)),
            n,
            c.mean,
            c.mean_stderr,
            Some(0.0),
        ));
        if c.predicted_variance > 0.0 {
            compare(&mut result, &stat, tol, tol.relative);
            let threshold = ks_limit(tol, cfg.replicas);
            let ks_name = format!("ks/g{}{}{}", c.p, c.q, component_tag(c.component));
            result.check(format!("{ks_name} (N={n})"), c.ks <= threshold, format!("KS {:.4} (limit {threshold:.4})", c.ks));
            result.ks.push(KsCheck { name: ks_name, n, replicas: cfg.replicas, distance: c.ks, threshold });
        } else {
            // A degenerate limit: the statistic must vanish in every replica.
            let ok = c.variance.variance <= EXACT_ZERO * EXACT_ZERO && c.mean.abs() <= EXACT_ZERO;
            result.check(
                format!("{name} identically zero (N={n})"),
                ok,
                format!("mean {:.3e}, variance {:.3e}", c.mean, c.variance.variance),
            );
        }
        result.statistics.push(stat);
    }
    if report.components.len() > 1 {
        let limit = correlation_limit(tol, cfg.replicas);
        let worst = report.max_abs_correlation;
        result.statistics.push(Statistic::new("max_cross_correlation", n, worst, 0.0, None));
        result.check(format!("cross-component correlation (N={n})"), worst <= limit, format!("max |corr| {worst:.4} (limit {limit:.4})"));
    }
    Ok(result)
}

/// `E ξφ(ξ)` against its truncated cumulant expansion.
pub fn run_decoupling(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let d = cfg.decoupling.clone().unwrap_or_default();
    let label = "decoupling";
    let mode = match d.samples {
        None => ExpectationMode::Exact,
        Some(samples) => ExpectationMode::MonteCarlo { samples, seed: SeedDerivation::new(cfg.master_seed, 0, label) },
    };
    let report = decoupling_check(&d.law, &d.phi, d.p, &mode)?;
    let mut result = ExperimentResult::new(cfg);
    if d.samples.is_some() {
        result.seeds.labels.push(label.into());
    }
    result.statistics.push(Statistic::new("residual", 0, report.residual, report.stderr, Some(0.0)));
    result.tables.push(Table {
        name: "decoupling".into(),
        columns: ["p", "lhs", "expansion", "residual", "stderr", "constant", "sup_derivative", "abs_moment", "remainder_bound"]
            .map(String::from)
            .to_vec(),
        rows: vec![vec![
            d.p as f64,
            report.lhs,
            report.expansion,
            report.residual,
            report.stderr,
            report.constant,
            report.sup_derivative,
            report.abs_moment,
            report.remainder_bound,
        ]],
    });
    let criterion = match d.criterion {
        DecouplingCriterion::Auto if matches!(d.law, Marginal::Gaussian { .. }) => DecouplingCriterion::Stderr,
        DecouplingCriterion::Auto => DecouplingCriterion::RemainderBound,
        c => c,
    };
    let k = d.k_stderr;
    let (ok, what) = match criterion {
        DecouplingCriterion::Stderr => (report.within_stderr(k), format!("{k} stderr")),
        _ => (report.within_bound(k), format!("{k} stderr + remainder bound {:.3e}", report.remainder_bound)),
    };
    result.check(
        format!("decoupling residual (p={})", d.p),
        ok,
        format!("residual {:.3e} ± {:.3e} within {what}", report.residual, report.stderr),
    );
    Ok(result)
}
