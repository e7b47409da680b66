use faer::{c64, Mat};
use wigner_fluct::ensembles::sample_wigner;
use wigner_fluct::matrixfn::{apply_function_entries, hs_reconstruct_entries, AlmostAnalyticExtension, HsGrid};

use crate::config::ExperimentConfig;
use crate::replicas::replica_seed;
use crate::result::{ExperimentResult, Statistic, Table};
use crate::Result;

fn max_dev(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    (a - b).norm_max()
}

/// Helffer–Sjöstrand reconstruction of the top block against the spectral path,
/// over every grid and extension order.
pub fn run_hs_check(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let f = cfg.function()?.clone();
    let hs = cfg.hs.clone().unwrap_or_default();
    let n = cfg.n[0];
    let label = format!("hs_check/n={n}");
    let x = sample_wigner(&cfg.ensemble, n, &replica_seed(cfg.master_seed, 0, &label))?;
    let exact = apply_function_entries(&x, &f, cfg.m)?;
    let mut result = ExperimentResult::new(cfg);
    result.seeds.labels.push(label);

    let mut grids = hs.grids.clone();
    grids.sort_unstable();
    let finest = *grids.last().expect("validated non-empty");
    let limit = cfg.tolerances.absolute;
    let mut rows = Vec::new();
    let mut at_finest = Vec::new();
    for &l in &hs.orders {
        let ext = AlmostAnalyticExtension::new(f.clone(), l)?;
        for &g in &grids {
            let grid = HsGrid { nx: g, ny: g, y_min: hs.y_min };
            let rec = hs_reconstruct_entries(&x, &ext, cfg.m, &grid)?;
            let dev = max_dev(&rec.entries, &exact);
            rows.push(vec![l as f64, g as f64, dev, rec.band_estimate]);
            if g == finest {
                result.statistics.push(Statistic::new(format!("deviation/l={l}"), n, dev, 0.0, Some(0.0)));
                result.check(format!("spectral agreement l={l}, grid {g}"), dev <= limit, format!("max deviation {dev:.3e} (limit {limit:e})"));
                at_finest.push((l, rec.entries));
            }
        }
    }
    for a in 0..at_finest.len() {
        for b in a + 1..at_finest.len() {
            let ((la, ra), (lb, rb)) = (&at_finest[a], &at_finest[b]);
            let dev = max_dev(ra, rb);
            result.statistics.push(Statistic::new(format!("order_agreement/l={la},l={lb}"), n, dev, 0.0, Some(0.0)));
            result.check(format!("order agreement l={la} vs l={lb}"), dev <= limit, format!("max deviation {dev:.3e} (limit {limit:e})"));
        }
    }
    result.tables.push(Table {
        name: "convergence".into(),
        columns: ["order_l", "grid", "max_deviation", "band_estimate"].map(String::from).to_vec(),
        rows,
    });
    Ok(result)
}
