//! Limiting laws: the entry fluctuation law of `√N(f(X)_ij − centering)` and the
//! Gaussian covariance of the resolvent field `Y(z)`.
//!
//! Centering is not part of a law; laws describe fluctuations only.

use std::sync::OnceLock;

use faer::{Mat, Side};
use num_complex::Complex64;
use rand_distr::StandardNormal;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleSpec, EntryClass, ExpectationRule, FieldKind, Marginal, SeedDerivation, Symmetry};
use crate::functionals;
use crate::functions::{Builtin, TestFunction};
use crate::normal;
use crate::quadrature::{self, GaussRule};
use crate::semicircle::{
    phi_mm, phi_pm, phi_pp, stieltjes_g, stieltjes_g_prime, QuadratureRule, SpectralParams, SpectralPoint,
};
use crate::{Error, Result};

/// Minimal smoothness for the entry law to apply.
pub const MIN_SMOOTHNESS: u32 = 4;

/// Eigenvalue floor below which an assembled covariance is reported as not PSD.
pub const PSD_TOL: f64 = 1e-10;

/// Limit law `a·W + G` of one matrix entry of `f(X)`.
///
/// Real field: `W` has law `entry_marginal` and `G ~ N(0, gaussian_variance)`.
/// Complex field: `√2 Re W` and `√2 Im W` are i.i.d. with law `entry_marginal`, and
/// `Re G`, `Im G` are i.i.d. `N(0, gaussian_variance/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryFluctuationLaw {
    pub coefficient: f64,
    pub entry_marginal: Marginal,
    pub gaussian_variance: f64,
    pub field: FieldKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawComponent {
    Value,
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdfMethod {
    Enumeration,
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfValue {
    pub probability: f64,
    pub method: CdfMethod,
}

impl EntryFluctuationLaw {
    pub fn new(coefficient: f64, entry_marginal: Marginal, gaussian_variance: f64, field: FieldKind) -> Result<Self> {
        entry_marginal.validate()?;
        if !coefficient.is_finite() || !(gaussian_variance >= 0.0 && gaussian_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "law needs a finite coefficient and nonnegative variance, got a = {coefficient}, v = {gaussian_variance}"
            )));
        }
        Ok(Self { coefficient, entry_marginal, gaussian_variance, field })
    }

    /// `a²·E|W|² + v`; for the complex field `E|W|²` equals the marginal variance.
    pub fn total_variance(&self) -> f64 {
        self.coefficient.powi(2) * self.entry_marginal.variance() + self.gaussian_variance
    }

    /// `(c, v)` such that the selected component is `c·w + N(0, v)` with `w` drawn from the marginal.
    pub fn component(&self, component: LawComponent) -> Result<(f64, f64)> {
        match (self.field, component) {
            (FieldKind::Real, LawComponent::Value) => Ok((self.coefficient, self.gaussian_variance)),
            (FieldKind::Complex, LawComponent::Re | LawComponent::Im) => {
                Ok((self.coefficient * std::f64::consts::FRAC_1_SQRT_2, 0.5 * self.gaussian_variance))
            }
            (field, c) => Err(Error::Contract(format!("component {c:?} is undefined for a {field:?} law"))),
        }
    }

    pub fn component_variance(&self, component: LawComponent) -> Result<f64> {
        let (c, v) = self.component(component)?;
        Ok(c * c * self.entry_marginal.variance() + v)
    }

    pub fn is_degenerate(&self) -> bool {
        self.gaussian_variance == 0.0
    }
}

/// Entry law of `√N(f(X)_ij − E f(X)_ij)` for the given ensemble.
pub fn predict_entry_law(
    f: &dyn TestFunction,
    spec: &EnsembleSpec,
    entry: EntryClass,
    q: &QuadratureRule,
) -> Result<EntryFluctuationLaw> {
    spec.validate()?;
    if f.smoothness_class() < MIN_SMOOTHNESS {
        return Err(Error::Contract(format!(
            "{} is C^{}, the entry law needs C^{MIN_SMOOTHNESS}",
            f.name(),
            f.smoothness_class()
        )));
    }
    let p = spec.params();
    let a = functionals::alpha(f, &p, q) / p.sigma();
    let k4 = spec.kappa4();
    let (marginal, variance, field) = match (spec.symmetry, entry) {
        (Symmetry::RealSymmetric, EntryClass::Diag) => (spec.diag, functionals::v1sq(f, k4, &p, q)?, FieldKind::Real),
        (Symmetry::Hermitian, EntryClass::Diag) => (spec.diag, functionals::v2sq(f, k4, &p, q)?, FieldKind::Real),
        (Symmetry::RealSymmetric, EntryClass::Offdiag) => (spec.offdiag, functionals::d2(f, &p, q)?, FieldKind::Real),
        (Symmetry::Hermitian, EntryClass::Offdiag) => (spec.offdiag, functionals::d2(f, &p, q)?, FieldKind::Complex),
    };
    EntryFluctuationLaw::new(a, marginal, variance, field)
}

/// Standard normal mass on `[−10, 10]`, with extra panel breaks at `kinks`.
fn normal_rule(kinks: &[f64]) -> GaussRule {
    static BASE: OnceLock<GaussRule> = OnceLock::new();
    let base = BASE.get_or_init(|| quadrature::gauss_legendre(8).expect("fixed rule"));
    let mut breaks = quadrature::linspace(-10.0, 10.0, 401);
    breaks.extend(kinks.iter().copied().filter(|k| k.abs() < 10.0));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let r = quadrature::composite_from_breaks(base, &breaks).expect("fixed rule");
    GaussRule { weights: r.nodes.iter().zip(&r.weights).map(|(&z, &w)| w * normal::pdf(z)).collect(), nodes: r.nodes }
}

/// `P(c·w ≤ u)` for a continuous marginal.
fn scaled_cdf(m: &Marginal, c: f64, u: f64) -> f64 {
    if c > 0.0 {
        m.cdf(u / c)
    } else if c < 0.0 {
        1.0 - m.cdf(u / c)
    } else if u >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `P(component ≤ t)`.
///
/// Discrete marginals are enumerated and the Gaussian marginal is closed form. For the
/// other continuous marginals the smoother of the two convolution orders is integrated:
/// over the entry with the normal CDF as kernel when the Gaussian part dominates, over the
/// Gaussian with the marginal CDF as kernel otherwise.
pub fn law_cdf(law: &EntryFluctuationLaw, t: f64, component: LawComponent) -> Result<CdfValue> {
    let (c, v) = law.component(component)?;
    let m = &law.entry_marginal;
    let s = v.sqrt();
    let out = |probability, method| Ok(CdfValue { probability, method });
    match m.expectation_rule() {
        ExpectationRule::Atoms(atoms) => {
            let p = atoms.iter().map(|&(x, w)| w * normal::cdf_with_variance(t - c * x, v)).sum();
            out(p, CdfMethod::Enumeration)
        }
        ExpectationRule::Gaussian { sd } => out(normal::cdf_with_variance(t, c * c * sd * sd + v), CdfMethod::ClosedForm),
        ExpectationRule::Quadrature { nodes, weights } => {
            if v == 0.0 {
                return out(scaled_cdf(m, c, t), CdfMethod::ClosedForm);
            }
            let spread = c.abs() * m.variance().sqrt();
            let p = if spread <= s {
                nodes.iter().zip(&weights).map(|(&x, &w)| w * normal::cdf((t - c * x) / s)).sum()
            } else {
                // the marginal CDF is only piecewise smooth: break panels at its support edges
                let (lo, hi) = m.support();
                let kinks: Vec<f64> = [lo, hi].iter().filter(|e| e.is_finite()).map(|e| (t - c * e) / s).collect();
                normal_rule(&kinks).integrate(|z| scaled_cdf(m, c, t - s * z))
            };
            out(p.clamp(0.0, 1.0), CdfMethod::Quadrature)
        }
    }
}

fn draw<R: Rng + ?Sized>(law: &EntryFluctuationLaw, rng: &mut R) -> Complex64 {
    let a = law.coefficient;
    match law.field {
        FieldKind::Real => {
            let w = law.entry_marginal.sample(rng);
            let g: f64 = rng.sample(StandardNormal);
            Complex64::new(a * w + law.gaussian_variance.sqrt() * g, 0.0)
        }
        FieldKind::Complex => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let (wr, wi) = (law.entry_marginal.sample(rng), law.entry_marginal.sample(rng));
            let (gr, gi): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let s = (0.5 * law.gaussian_variance).sqrt();
            Complex64::new(a * h * wr + s * gr, a * h * wi + s * gi)
        }
    }
}

/// One draw; the imaginary part is zero for a real law.
pub fn law_sample(law: &EntryFluctuationLaw, seed: &SeedDerivation) -> Complex64 {
    draw(law, &mut seed.rng())
}

/// `count` draws from a single stream.
pub fn law_samples(law: &EntryFluctuationLaw, count: usize, seed: &SeedDerivation) -> Vec<Complex64> {
    let mut rng = seed.rng();
    (0..count).map(|_| draw(law, &mut rng)).collect()
}

/// Which covariance of `Y(z)`, `Y(w)` is requested; `ReIm` is `Cov(Re Y(z), Im Y(w))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentPair {
    ReRe,
    ImIm,
    ReIm,
}

/// Covariance of the Gaussian field `Y` at one entry of the given class.
pub fn predict_resolvent_cov(
    z: SpectralPoint,
    w: SpectralPoint,
    spec: &EnsembleSpec,
    entry: EntryClass,
    pair: ComponentPair,
) -> Result<f64> {
    let p = spec.params();
    let s4 = p.sigma2() * p.sigma2();
    let k4 = spec.kappa4();
    let kernel = |z, w| -> Result<f64> {
        match pair {
            ComponentPair::ReRe => phi_pp(z, w, &p),
            ComponentPair::ImIm => phi_mm(z, w, &p),
            ComponentPair::ReIm => phi_pm(z, w, &p),
        }
    };
    match entry {
        EntryClass::Diag => {
            let (gz, gw) = (stieltjes_g(z, &p)?, stieltjes_g(w, &p)?);
            let cumulant = match pair {
                ComponentPair::ReRe => gz.re * gw.re,
                ComponentPair::ImIm => gz.im * gw.im,
                ComponentPair::ReIm => gz.re * gw.im,
            };
            let weight = match spec.symmetry {
                Symmetry::RealSymmetric => 2.0,
                Symmetry::Hermitian => 1.0,
            };
            Ok(k4 * cumulant + weight * s4 * kernel(z, w)?)
        }
        EntryClass::Offdiag => match (spec.symmetry, pair) {
            (Symmetry::RealSymmetric, _) => Ok(s4 * kernel(z, w)?),
            (Symmetry::Hermitian, ComponentPair::ReRe | ComponentPair::ImIm) => {
                Ok(0.5 * s4 * (phi_pp(z, w, &p)? + phi_mm(z, w, &p)?))
            }
            (Symmetry::Hermitian, ComponentPair::ReIm) => Ok(0.5 * s4 * (phi_pm(z, w, &p)? - phi_pm(w, z, &p)?)),
        },
    }
}

/// `Var Y(x)` at a real off-cut point for the diagonal or the (real) off-diagonal entry;
/// for a Hermitian off-diagonal entry this is `Var Re Y = Var Im Y`.
pub fn real_point_variance(x: f64, spec: &EnsembleSpec, entry: EntryClass) -> Result<f64> {
    let p = spec.params();
    let pt = SpectralPoint::real(x);
    let g = stieltjes_g(pt, &p)?.re;
    let gp = stieltjes_g_prime(pt, &p)?.re;
    let s4 = p.sigma2() * p.sigma2();
    Ok(match (spec.symmetry, entry) {
        (Symmetry::RealSymmetric, EntryClass::Diag) => spec.kappa4() * g * g - 2.0 * s4 * gp,
        (Symmetry::Hermitian, EntryClass::Diag) => spec.kappa4() * g * g - s4 * gp,
        (Symmetry::RealSymmetric, EntryClass::Offdiag) => -s4 * gp,
        (Symmetry::Hermitian, EntryClass::Offdiag) => -0.5 * s4 * gp,
    })
}

/// The Gaussian field `Y` and the limit `Υ(z) = g²(z)(W + Y(z))` at one entry over a point set.
///
/// Distinct entries are independent, so one entry describes the whole field.
/// Matrices are over the real vector `(Re ·(z₁), Im ·(z₁), Re ·(z₂), …)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventFieldLaw {
    pub spec: EnsembleSpec,
    pub entry: EntryClass,
    pub points: Vec<SpectralPoint>,
}

impl ResolventFieldLaw {
    pub fn new(spec: EnsembleSpec, entry: EntryClass, points: Vec<SpectralPoint>) -> Result<Self> {
        spec.validate()?;
        let p = spec.params();
        for z in &points {
            stieltjes_g(*z, &p)?;
        }
        Ok(Self { spec, entry, points })
    }

    /// Covariance between `(entry₁, z, re/im)` and `(entry₂, w, re/im)`: zero unless the entries coincide.
    pub fn cross_entry_cov(
        &self,
        same_entry: bool,
        z: SpectralPoint,
        w: SpectralPoint,
        pair: ComponentPair,
    ) -> Result<f64> {
        if same_entry {
            predict_resolvent_cov(z, w, &self.spec, self.entry, pair)
        } else {
            Ok(0.0)
        }
    }

    pub fn y_covariance(&self) -> Result<Mat<f64>> {
        let k = self.points.len();
        let mut c = Mat::<f64>::zeros(2 * k, 2 * k);
        for (a, &z) in self.points.iter().enumerate() {
            for (b, &w) in self.points.iter().enumerate() {
                let cov = |pair| predict_resolvent_cov(z, w, &self.spec, self.entry, pair);
                c[(2 * a, 2 * b)] = cov(ComponentPair::ReRe)?;
                c[(2 * a + 1, 2 * b + 1)] = cov(ComponentPair::ImIm)?;
                c[(2 * a, 2 * b + 1)] = cov(ComponentPair::ReIm)?;
                c[(2 * a + 1, 2 * b)] = predict_resolvent_cov(w, z, &self.spec, self.entry, ComponentPair::ReIm)?;
            }
        }
        Ok(c)
    }

    /// Covariance of `(Re W, Im W)` for the corner entry.
    fn w_covariance(&self) -> [f64; 2] {
        match (self.spec.symmetry, self.entry) {
            (_, EntryClass::Diag) => [self.spec.diag_variance(), 0.0],
            (Symmetry::RealSymmetric, EntryClass::Offdiag) => [self.spec.offdiag.variance(), 0.0],
            (Symmetry::Hermitian, EntryClass::Offdiag) => {
                let h = 0.5 * self.spec.offdiag.variance();
                [h, h]
            }
        }
    }

    pub fn upsilon_covariance(&self) -> Result<Mat<f64>> {
        let p = self.spec.params();
        let k = self.points.len();
        let y = self.y_covariance()?;
        let [wr, wi] = self.w_covariance();
        // Underlying vector: (Re W, Im W, Y block).
        let mut u = Mat::<f64>::zeros(2 * k + 2, 2 * k + 2);
        u[(0, 0)] = wr;
        u[(1, 1)] = wi;
        u.submatrix_mut(2, 2, 2 * k, 2 * k).copy_from(&y);
        let mut map = Mat::<f64>::zeros(2 * k, 2 * k + 2);
        for (a, &z) in self.points.iter().enumerate() {
            let g = stieltjes_g(z, &p)?;
            let g2 = g * g;
            // Re(G(x + iy)) = Re G·x − Im G·y, Im(G(x + iy)) = Im G·x + Re G·y.
            for (col_re, col_im) in [(0, 1), (2 + 2 * a, 3 + 2 * a)] {
                map[(2 * a, col_re)] = g2.re;
                map[(2 * a, col_im)] = -g2.im;
                map[(2 * a + 1, col_re)] = g2.im;
                map[(2 * a + 1, col_im)] = g2.re;
            }
        }
        Ok(&map * &u * map.transpose())
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(c: &Mat<f64>) -> Result<f64> {
    if c.nrows() == 0 {
        return Ok(0.0);
    }
    let sym = Mat::<f64>::from_fn(c.nrows(), c.ncols(), |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = sym
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed: {e:?}")))?;
    Ok((0..c.nrows()).map(|k| eig.S()[k]).fold(f64::INFINITY, f64::min))
}

pub fn check_psd(c: &Mat<f64>) -> Result<()> {
    let lo = min_eigenvalue(c)?;
    if lo < -PSD_TOL {
        return Err(Error::InternalConsistency { quantity: "covariance min eigenvalue", value: lo });
    }
    Ok(())
}

/// Entry law of `f_z(x) = 1/(z − x)` against the closed forms read off the resolvent field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub coefficient: f64,
    pub coefficient_expected: f64,
    pub offdiag_variance: f64,
    pub offdiag_variance_expected: f64,
    pub diag_variance: f64,
    pub diag_variance_expected: f64,
}

impl ConsistencyReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.coefficient - self.coefficient_expected,
            self.offdiag_variance - self.offdiag_variance_expected,
            self.diag_variance - self.diag_variance_expected,
        ]
        .iter()
        .fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// `a(f_z) = g²`, `d²(f_z) = −σ⁴g⁴g′`, and the diagonal Gaussian variance
/// `κ₄g⁶ − 2σ⁴g⁴g′` (real) or `κ₄g⁶ − σ⁴g⁴g′` (Hermitian).
pub fn consistency_resolvent_vs_entry(z: f64, spec: &EnsembleSpec, q: &QuadratureRule) -> Result<ConsistencyReport> {
    let p: SpectralParams = spec.params();
    let pt = SpectralPoint::real(z);
    let g = stieltjes_g(pt, &p)?.re;
    let gp = stieltjes_g_prime(pt, &p)?.re;
    let f = Builtin::ResolventRe { re: z, im: 0.0 };
    let diag = predict_entry_law(&f, spec, EntryClass::Diag, q)?;
    let off = predict_entry_law(&f, spec, EntryClass::Offdiag, q)?;
    let s4 = p.sigma2() * p.sigma2();
    let g4 = g.powi(4);
    let weight = if spec.is_hermitian() { 1.0 } else { 2.0 };
    Ok(ConsistencyReport {
        coefficient: off.coefficient,
        coefficient_expected: g * g,
        offdiag_variance: off.gaussian_variance,
        offdiag_variance_expected: -s4 * g4 * gp,
        diag_variance: diag.gaussian_variance,
        diag_variance_expected: spec.kappa4() * g.powi(6) - weight * s4 * g4 * gp,
    })
}
