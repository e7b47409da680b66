//! Acceptance criteria 1–10. Runs without the libtest harness so every
//! criterion prints its PASS/FAIL line. `ACCEPTANCE_ONLY=4,7` restricts the run.

use std::time::Instant;

use num_complex::Complex64;
use wigner_fluct::ensembles::{EnsembleSpec, FieldKind, Marginal};
use wigner_fluct::functionals;
use wigner_fluct::functions::{catalog, Builtin, TestFunction};
use wigner_fluct::semicircle::{phi, stieltjes_g, stieltjes_g_prime, QuadratureRule, SpectralParams, SpectralPoint};
use wigner_harness::config::{DecouplingConfig, DecouplingCriterion, QfConfig};
use wigner_harness::{run, ExperimentConfig, ExperimentKind, ExperimentResult};

type Outcome = Result<Vec<String>, Vec<String>>;

/// Collects named assertions; the criterion passes iff all of them hold.
#[derive(Default)]
struct Sheet {
    lines: Vec<String>,
    failed: bool,
}

impl Sheet {
    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        self.failed |= !ok;
        self.lines.push(format!("{} {}", if ok { "ok  " } else { "FAIL" }, what.into()));
    }

    fn within_rel(&mut self, what: &str, est: f64, target: f64, rel: f64) {
        let r = (est - target).abs() / target.abs();
        self.expect(r <= rel, format!("{what}: {est:.5} vs {target:.5}, relative error {r:.4} (limit {rel})"));
    }

    fn run_checks(&mut self, r: &ExperimentResult) {
        for c in r.failures() {
            self.lines.push(format!("note: harness check '{}' failed: {}", c.name, c.detail));
        }
    }

    fn finish(self) -> Outcome {
        if self.failed {
            Err(self.lines)
        } else {
            Ok(self.lines)
        }
    }
}

fn stat<'a>(r: &'a ExperimentResult, name: &str) -> &'a wigner_harness::result::Statistic {
    r.statistic(name).unwrap_or_else(|| panic!("statistic {name} missing"))
}

fn execute(cfg: &ExperimentConfig) -> ExperimentResult {
    run(cfg).unwrap_or_else(|e| panic!("{} failed: {e}", cfg.kind.as_str()))
}

/// `g` on the real axis outside `[-2, 2]` in closed form, `σ = 1`.
fn g_real(x: f64) -> f64 {
    (x - x.signum() * (x * x - 4.0).sqrt()) / 2.0
}

fn c1_analytic() -> Outcome {
    let mut s = Sheet::default();
    for sigma in [1.0, 0.7] {
        let p = SpectralParams::new(sigma).unwrap();
        let s2 = p.sigma2();
        let q = QuadratureRule::default_for(&p);
        let (mut worst_eq, mut worst_phi, mut worst_quad) = (0.0f64, 0.0f64, 0.0f64);
        for a in 0..100 {
            for b in 0..100 {
                let re = -5.0 + 10.0 * (a as f64 + 0.5) / 100.0;
                let im = if b < 50 { -5.0 + 4.99 * b as f64 / 49.0 } else { 0.01 + 4.99 * (b - 50) as f64 / 49.0 };
                let z = SpectralPoint::new(re, im);
                let g = stieltjes_g(z, &p).unwrap();
                let zc = Complex64::new(re, im);
                worst_eq = worst_eq.max((s2 * g * g - zc * g + 1.0).norm());
                let phi_zz = phi(z, z, &p).unwrap();
                worst_phi = worst_phi.max((phi_zz + stieltjes_g_prime(z, &p).unwrap()).norm());
                // Away from the support the quadrature of ∫dμ/(z−x)² is an independent oracle.
                if im.abs() >= 1.0 || re.abs() >= 2.0 * sigma + 1.0 {
                    let direct = q.expect_complex(|x| 1.0 / ((zc - x) * (zc - x)));
                    worst_quad = worst_quad.max((phi_zz - direct).norm());
                }
            }
        }
        s.expect(worst_eq <= 1e-12, format!("σ={sigma}: max |σ²g²−zg+1| over 10⁴ points = {worst_eq:.2e}"));
        s.expect(worst_phi <= 1e-6, format!("σ={sigma}: max |φ(z,z)+g′(z)| = {worst_phi:.2e}"));
        s.expect(worst_quad <= 1e-6, format!("σ={sigma}: max |φ(z,z) − ∫dμ/(z−x)²| at distance ≥ 1 = {worst_quad:.2e}"));
    }

    let p = SpectralParams::unit();
    let q = QuadratureRule::default_for(&p);
    let mut worst = f64::INFINITY;
    for f in catalog(1.0) {
        let (a, b, w2) = (functionals::alpha(&f, &p, &q), functionals::beta(&f, &p, &q), functionals::omega2(&f, &q));
        worst = worst.min(w2 - a * a - b * b);
    }
    s.expect(worst >= -1e-12, format!("min ω²−α²−β² over the built-in catalog = {worst:.3e}"));

    let mut worst = 0.0f64;
    for x in [2.5, 3.0, -2.8, 4.0, -6.0] {
        let f = Builtin::ResolventRe { re: x, im: 0.0 };
        let (g, gp) = (g_real(x), stieltjes_g_prime(SpectralPoint::real(x), &p).unwrap().re);
        worst = worst.max((functionals::alpha(&f, &p, &q) - g * g).abs());
        worst = worst.max((functionals::d2(&f, &p, &q).unwrap() + g.powi(4) * gp).abs());
        for k4 in [-2.0, -1.0, 0.0, 1.5, 4.0] {
            let v = functionals::v1sq(&f, k4, &p, &q).unwrap();
            worst = worst.max((v - (k4 * g.powi(6) - 2.0 * g.powi(4) * gp)).abs());
        }
    }
    s.expect(worst <= 1e-9, format!("a(f_z)=g², d²(f_z)=−g⁴g′, v₁²(f_z)=κ₄g⁶−2g⁴g′: max error {worst:.2e}"));
    s.finish()
}

fn c2_degeneracy() -> Outcome {
    let mut s = Sheet::default();
    let p = SpectralParams::unit();
    let q = QuadratureRule::default_for(&p);
    let rademacher_k4 = Marginal::rademacher().cumulants().2;
    s.expect((rademacher_k4 + 2.0).abs() <= 1e-15, format!("Rademacher κ₄ = {rademacher_k4}"));
    for (name, f) in [("x", Builtin::monomial(1)), ("2−3x", Builtin::Polynomial { coeffs: vec![2.0, -3.0] })] {
        for k4 in [-2.0, 0.0, 3.0] {
            let v = functionals::v1sq(&f, k4, &p, &q).unwrap();
            s.expect(v.abs() <= 1e-12, format!("v₁²({name}, κ₄={k4}) = {v:.2e}"));
        }
        let d = functionals::d2(&f, &p, &q).unwrap();
        s.expect(d.abs() <= 1e-12, format!("d²({name}) = {d:.2e}"));
    }
    let v = functionals::v1sq(&Builtin::monomial(2), rademacher_k4, &p, &q).unwrap();
    s.expect(v.abs() <= 1e-12, format!("v₁²(x², Rademacher) = {v:.2e}"));
    s.finish()
}

fn c3_hs() -> Outcome {
    let mut s = Sheet::default();
    let cfg = ExperimentConfig::preset(ExperimentKind::HsCheck);
    let r = execute(&cfg);
    for l in [3, 5] {
        let d = stat(&r, &format!("deviation/l={l}")).estimate;
        s.expect(d <= 1e-6, format!("C⁷ bump, N=100, m=3, grid 400², l={l}: max deviation {d:.2e}"));
    }
    let d = stat(&r, "order_agreement/l=3,l=5").estimate;
    s.expect(d <= 1e-6, format!("l=3 vs l=5 agreement {d:.2e}"));
    s.run_checks(&r);
    s.finish()
}

fn c4_entry_law() -> Outcome {
    let mut s = Sheet::default();
    let cfg = ExperimentConfig::preset(ExperimentKind::EntryMc);
    let r = execute(&cfg);
    let pred = stat(&r, "variance/offdiag").predicted.unwrap();
    s.expect((pred - 5.0).abs() <= 1e-9, format!("predicted off-diagonal variance {pred}"));
    s.within_rel("off-diagonal variance", stat(&r, "variance/offdiag").estimate, 5.0, 0.10);
    let ks = r.ks_check("ks/offdiag").expect("KS entry").distance;
    s.expect(ks <= 0.035, format!("KS vs 2W₁₂ ⊛ N(0,1): {ks:.4} (limit 0.035)"));
    let corr = stat(&r, "max_cross_correlation").estimate;
    let limit = 3.0 / (cfg.replicas as f64).sqrt();
    s.expect(corr <= limit, format!("max cross-entry |corr| {corr:.4} (limit {limit:.4})"));
    s.run_checks(&r);
    s.finish()
}

fn c5_goe_gue() -> Outcome {
    let mut s = Sheet::default();
    let base = ExperimentConfig::preset(ExperimentKind::EntryMc);
    let goe = execute(&ExperimentConfig { ensemble: EnsembleSpec::goe(1.0), ..base.clone() });
    s.within_rel("GOE diagonal variance vs 2ω²=10", stat(&goe, "variance/diag").estimate, 10.0, 0.10);
    s.within_rel("GOE off-diagonal variance vs ω²=5", stat(&goe, "variance/offdiag").estimate, 5.0, 0.10);
    s.run_checks(&goe);
    let gue = execute(&ExperimentConfig { ensemble: EnsembleSpec::gue(1.0), ..base });
    for part in ["re", "im"] {
        let name = format!("variance/offdiag_{part}");
        s.within_rel(&format!("GUE off-diagonal {part} variance vs ω²/2=2.5"), stat(&gue, &name).estimate, 2.5, 0.10);
    }
    s.run_checks(&gue);
    s.finish()
}

fn c6_fields() -> Outcome {
    let mut s = Sheet::default();
    let cfg = ExperimentConfig::preset(ExperimentKind::SchurField);
    let r = execute(&cfg);
    s.within_rel("diagonal Var Y(2.5) vs −2g′ = 2/3", stat(&r, "cov/diag/re0,re0").estimate, 2.0 / 3.0, 0.15);
    s.within_rel("off-diagonal Var Y(2.5) vs −g′ = 1/3", stat(&r, "cov/offdiag/re0,re0").estimate, 1.0 / 3.0, 0.15);
    // 2φ(2.5, 3) from the divided difference of g.
    let two_point = 2.0 * -(g_real(3.0) - g_real(2.5)) / 0.5;
    let pred = stat(&r, "cov/diag/re0,re1").predicted.unwrap();
    s.expect((pred - two_point).abs() <= 1e-9, format!("predicted Cov(Y(2.5), Y(3)) {pred:.6} vs 2φ {two_point:.6}"));
    s.within_rel("diagonal Cov(Y(2.5), Y(3))", stat(&r, "cov/diag/re0,re1").estimate, two_point, 0.15);
    s.run_checks(&r);

    let herm = ExperimentConfig { ensemble: EnsembleSpec::gue(1.0), points: vec![[2.5, 0.0]], ..cfg };
    let r = execute(&herm);
    let c = stat(&r, "cov/offdiag/re0,im0");
    let z = (c.estimate / c.stderr).abs();
    s.expect(z <= 3.0, format!("Hermitian Cov(Re Y₁₂, Im Y₁₂) = {:.5} ± {:.5}, |z| {z:.2} (limit 3)", c.estimate, c.stderr));
    s.run_checks(&r);
    s.finish()
}

fn c7_decay() -> Outcome {
    let mut s = Sheet::default();
    let cfg = ExperimentConfig::preset(ExperimentKind::Decay);
    let r = execute(&cfg);
    for name in ["trace_resolvent_bias", "entry_variance", "diagonal_mean_bias"] {
        let reg = r.regression(name).unwrap_or_else(|| panic!("regression {name} missing"));
        let ok = (reg.fit.slope + 1.0).abs() <= 0.3;
        let values: Vec<String> = reg.values.iter().map(|v| format!("{v:.3e}")).collect();
        s.expect(ok, format!("{name}: slope {:.3} (95% CI {:.3}..{:.3}) over N={:?}, values [{}]", reg.fit.slope, reg.fit.slope_ci.0, reg.fit.slope_ci.1, reg.ns, values.join(", ")));
    }
    let fallbacks: f64 = r.statistics.iter().filter(|x| x.name == "spectral_path_replicas").map(|x| x.estimate).sum();
    s.lines.push(format!("note: {fallbacks} replicas fell back to the spectral path"));
    s.run_checks(&r);
    s.finish()
}

fn c8_quadratic_forms() -> Outcome {
    let mut s = Sheet::default();
    let mut cfg = ExperimentConfig::preset(ExperimentKind::QfClt);
    cfg.tolerances.ks_max = Some(0.02);
    let r = execute(&cfg);
    s.within_rel("Gaussian, M=I: variance vs 2", stat(&r, "variance/g00").estimate, 2.0, 0.10);
    let ks = r.ks_check("ks/g00").expect("KS entry").distance;
    s.expect(ks <= 0.02, format!("KS vs N(0,2): {ks:.4} (limit 0.02)"));
    s.run_checks(&r);

    cfg.qf = Some(QfConfig { coordinates: Marginal::rademacher(), field: FieldKind::Real, ..QfConfig::default() });
    let r = execute(&cfg);
    let v = stat(&r, "variance/g00").estimate;
    let m = stat(&r, "mean/g00").estimate;
    s.expect(v == 0.0 && m == 0.0, format!("Rademacher, M=I: mean {m:e}, variance {v:e} over {} replicas", cfg.replicas));
    s.run_checks(&r);
    s.finish()
}

fn c9_decoupling() -> Outcome {
    let mut s = Sheet::default();
    let gauss = ExperimentConfig::preset(ExperimentKind::Decoupling);
    let r = execute(&gauss);
    let res = stat(&r, "residual");
    s.expect(res.estimate.abs() <= 5.0 * res.stderr, format!("Gaussian, φ=sin, p=1: residual {:.3e} ± {:.3e}", res.estimate, res.stderr));

    for phi in [Builtin::Sin { a: 1.3 }, Builtin::Exp { a: 0.7 }, Builtin::ResolventRe { re: 0.0, im: 1.0 }] {
        let cfg = ExperimentConfig {
            decoupling: Some(DecouplingConfig {
                law: Marginal::rademacher(),
                phi: phi.clone(),
                p: 3,
                samples: None,
                criterion: DecouplingCriterion::RemainderBound,
                ..DecouplingConfig::default()
            }),
            ..gauss.clone()
        };
        let r = execute(&cfg);
        let row = &r.tables[0].rows[0];
        let (lhs, residual, bound) = (row[1], row[3], row[8]);
        let (a, b) = (phi.eval(1.0), phi.eval(-1.0));
        s.expect((lhs - (a - b) / 2.0).abs() <= 1e-14, format!("{}: E ξφ(ξ) = {lhs:.12} vs (φ(1)−φ(−1))/2", phi.name()));
        s.expect(residual.abs() <= bound, format!("{}: p=3 residual {residual:.3e} within bound {bound:.3e}", phi.name()));
    }
    s.finish()
}

fn c10_infrastructure() -> Outcome {
    let mut s = Sheet::default();
    let small = |kind| {
        let mut c = ExperimentConfig::preset(kind);
        c.n = match kind {
            ExperimentKind::Decay => vec![40, 80, 160],
            ExperimentKind::QfClt => vec![500],
            _ => vec![60],
        };
        c.replicas = 200;
        if let Some(d) = c.decay.as_mut() {
            d.spectral_replicas = 100;
        }
        if let Some(d) = c.decoupling.as_mut() {
            d.samples = Some(20_000);
        }
        c
    };
    let kinds = [
        ExperimentKind::Predict,
        ExperimentKind::EntryMc,
        ExperimentKind::ResolventField,
        ExperimentKind::SchurField,
        ExperimentKind::QfClt,
        ExperimentKind::Decoupling,
        ExperimentKind::Decay,
        ExperimentKind::HsCheck,
    ];
    for kind in kinds {
        let cfg = small(kind);
        let a = execute(&cfg).without_timing();
        let b = execute(&cfg).without_timing();
        let (ja, jb) = (a.to_json().unwrap(), b.to_json().unwrap());
        s.expect(ja == jb, format!("{}: rerun is bit-identical", kind.as_str()));
        if kind.samples_matrices() || kind == ExperimentKind::Decoupling {
            let serial = execute(&ExperimentConfig { parallel: false, ..cfg.clone() }).without_timing();
            let same = serial.statistics == a.statistics && serial.ks == a.ks && serial.regressions == a.regressions;
            s.expect(same, format!("{}: serial estimates equal parallel ones", kind.as_str()));
        }
        let back = ExperimentResult::from_json(&ja).unwrap();
        s.expect(back == a, format!("{}: JSON round-trip", kind.as_str()));
    }
    s.finish()
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "analytic identities", c1_analytic),
        (2, "degeneracy cases", c2_degeneracy),
        (3, "Helffer-Sjöstrand reconstruction", c3_hs),
        (4, "entry-law Monte Carlo", c4_entry_law),
        (5, "GOE/GUE reduction", c5_goe_gue),
        (6, "resolvent/Schur fields", c6_fields),
        (7, "decay rates", c7_decay),
        (8, "quadratic-form CLT", c8_quadratic_forms),
        (9, "decoupling formula", c9_decoupling),
        (10, "infrastructure", c10_infrastructure),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, lines) = match outcome {
            Ok(l) => ("PASS", l),
            Err(l) => {
                failed.push(id);
                ("FAIL", l)
            }
        };
        println!("{tag} criterion {id}: {name} ({secs:.1} s)");
        for l in lines {
            println!("     {l}");
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
