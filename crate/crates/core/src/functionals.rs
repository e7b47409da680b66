//! Semicircle functionals of a test function and the limiting variance formulas.

use serde::{Deserialize, Serialize};

use crate::functions::TestFunction;
use crate::semicircle::{QuadratureRule, SpectralParams};
use crate::{Error, Result};

/// Negative excursions up to this size are attributed to round-off and clamped to zero.
pub const CLAMP_TOL: f64 = 1e-10;

/// Functionals of `f` for one off-diagonal law `μ`.
///
/// `kappa4_used` is the fourth cumulant `m₄ − 3σ⁴` of `μ`. `v1sq` uses it as is; `v2sq`
/// uses the Hermitian effective value `E|W₁₂|⁴ − 2σ⁴ = κ₄/2` of an ensemble built on `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub alpha: f64,
    pub beta: f64,
    pub omega2: f64,
    pub v1sq: f64,
    pub v2sq: f64,
    pub d2: f64,
    pub kappa4_used: f64,
}

/// `E[f(η) η/σ]`.
pub fn alpha(f: &dyn TestFunction, p: &SpectralParams, q: &QuadratureRule) -> f64 {
    let s = p.sigma();
    q.expect(|x| f.eval(x) * x / s)
}

/// `E[f(η)(η² − σ²)/σ²]`.
pub fn beta(f: &dyn TestFunction, p: &SpectralParams, q: &QuadratureRule) -> f64 {
    let s2 = p.sigma2();
    q.expect(|x| f.eval(x) * (x * x - s2) / s2)
}

/// `Var f(η)`.
pub fn omega2(f: &dyn TestFunction, q: &QuadratureRule) -> f64 {
    let (m1, m2) = moments12(f, q);
    (m2 - m1 * m1).max(0.0)
}

fn moments12(f: &dyn TestFunction, q: &QuadratureRule) -> (f64, f64) {
    q.nodes().iter().zip(q.weights()).fold((0.0, 0.0), |(a, b), (&x, &w)| {
        let v = f.eval(x);
        (a + w * v, b + w * v * v)
    })
}

/// Raw moments `(α, β, ω²)` from a single pass over the nodes.
fn raw(f: &dyn TestFunction, p: &SpectralParams, q: &QuadratureRule) -> (f64, f64, f64) {
    let (s, s2) = (p.sigma(), p.sigma2());
    let (mut m1, mut m2, mut a, mut b) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &w) in q.nodes().iter().zip(q.weights()) {
        let v = f.eval(x);
        m1 += w * v;
        m2 += w * v * v;
        a += w * v * x / s;
        b += w * v * (x * x - s2) / s2;
    }
    (a, b, (m2 - m1 * m1).max(0.0))
}

/// Real-convention floor `κ₄ ≥ −2σ⁴`, attained only by the two-point law.
pub fn check_kappa4(kappa4: f64, p: &SpectralParams) -> Result<()> {
    check_floor(kappa4, -2.0 * p.sigma2() * p.sigma2())
}

/// Hermitian-convention floor `E|W₁₂|⁴ − 2σ⁴ ≥ −σ⁴`.
pub fn check_kappa4_hermitian(kappa4: f64, p: &SpectralParams) -> Result<()> {
    check_floor(kappa4, -p.sigma2() * p.sigma2())
}

fn check_floor(kappa4: f64, floor: f64) -> Result<()> {
    // tolerate representation error at the Bernoulli floor itself
    if !kappa4.is_finite() || kappa4 < floor * (1.0 + 1e-12) {
        return Err(Error::InvalidCumulant { kappa4, floor });
    }
    Ok(())
}

fn clamp(value: f64, quantity: &'static str) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(Error::InternalConsistency { quantity, value })
    }
}

fn v1sq_from(a: f64, b: f64, w2: f64, kappa4: f64, s4: f64) -> Result<f64> {
    clamp(2.0 * (w2 - a * a + kappa4 * b * b / (2.0 * s4)), "v1sq")
}

fn v2sq_from(a: f64, b: f64, w2: f64, kappa4: f64, s4: f64) -> Result<f64> {
    clamp(w2 - a * a + kappa4 * b * b / s4, "v2sq")
}

fn d2_from(a: f64, w2: f64) -> Result<f64> {
    clamp(w2 - a * a, "d2")
}

/// Gaussian variance of a real symmetric diagonal entry: `2(ω² − α² + κ₄β²/(2σ⁴))`.
pub fn v1sq(f: &dyn TestFunction, kappa4: f64, p: &SpectralParams, q: &QuadratureRule) -> Result<f64> {
    check_kappa4(kappa4, p)?;
    let (a, b, w2) = raw(f, p, q);
    v1sq_from(a, b, w2, kappa4, p.sigma2() * p.sigma2())
}

/// Gaussian variance of a Hermitian diagonal entry: `ω² − α² + κ₄β²/σ⁴`, with the
/// Hermitian effective `κ₄ = E|W₁₂|⁴ − 2σ⁴`.
pub fn v2sq(f: &dyn TestFunction, kappa4: f64, p: &SpectralParams, q: &QuadratureRule) -> Result<f64> {
    check_kappa4_hermitian(kappa4, p)?;
    let (a, b, w2) = raw(f, p, q);
    v2sq_from(a, b, w2, kappa4, p.sigma2() * p.sigma2())
}

/// Gaussian variance of an off-diagonal entry: `ω² − α²`.
pub fn d2(f: &dyn TestFunction, p: &SpectralParams, q: &QuadratureRule) -> Result<f64> {
    let (a, _, w2) = raw(f, p, q);
    d2_from(a, w2)
}

pub fn report(
    f: &dyn TestFunction,
    kappa4: f64,
    p: &SpectralParams,
    q: &QuadratureRule,
) -> Result<FunctionalReport> {
    check_kappa4(kappa4, p)?;
    let (a, b, w2) = raw(f, p, q);
    let s4 = p.sigma2() * p.sigma2();
    Ok(FunctionalReport {
        alpha: a,
        beta: b,
        omega2: w2,
        v1sq: v1sq_from(a, b, w2, kappa4, s4)?,
        v2sq: v2sq_from(a, b, w2, 0.5 * kappa4, s4)?,
        d2: d2_from(a, w2)?,
        kappa4_used: kappa4,
    })
}
