//! Test functions with derivatives of every order up to a declared maximum.
//!
//! Built-ins evaluate through [`Jet`]s, so `derivative(k, x)` is exact up to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Debug;

use crate::jet::{Jet, MAX_ORDER};
use crate::{Error, Result};

/// Smoothness class reported by C^∞ functions.
pub const SMOOTH: u32 = u32::MAX;

/// Below this (or above one minus this) the smooth step is treated as exactly flat.
const STEP_FLAT: f64 = 1e-3;

pub trait TestFunction: Debug + Send + Sync {
    fn name(&self) -> String;

    /// Highest derivative order available.
    fn max_order(&self) -> usize;

    /// Number of continuous derivatives, [`SMOOTH`] for C^∞.
    fn smoothness_class(&self) -> u32;

    /// Interval outside of which the function vanishes, if any.
    fn support_hint(&self) -> Option<(f64, f64)>;

    /// Taylor jet at `x` of order `order ≤ max_order()`.
    fn jet(&self, x: f64, order: usize) -> Jet;

    fn eval(&self, x: f64) -> f64 {
        self.jet(x, 0).value()
    }

    fn derivative(&self, k: usize, x: f64) -> Result<f64> {
        if k > self.max_order() {
            return Err(Error::DerivativeOrder {
                name: self.name(),
                requested: k,
                max: self.max_order(),
            });
        }
        Ok(self.jet(x, k).derivative(k))
    }

    /// `(c, r)` such that `f(x) = Σ c_k x^k` whenever `|x| ≤ r`.
    fn polynomial_window(&self) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// C^∞ smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
pub fn smooth_step(t: Jet) -> Jet {
    let v = t.value();
    if v <= STEP_FLAT {
        return Jet::zero(t.order());
    }
    if v >= 1.0 - STEP_FLAT {
        return Jet::constant(1.0, t.order());
    }
    let psi = |s: Jet| (-s.recip()).exp();
    let a = psi(t);
    let b = psi((-t).add_scalar(1.0));
    a / (a + b)
}

/// Symmetric plateau: 1 on `|x| ≤ inner`, 0 on `|x| ≥ outer`, C^∞ in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub inner: f64,
    pub outer: f64,
}

impl Plateau {
    /// Plateau edge `2σ + δ`, outer edge `2σ + 2δ`.
    pub fn around_support(sigma: f64, delta: f64) -> Self {
        Self { inner: 2.0 * sigma + delta, outer: 2.0 * sigma + 2.0 * delta }
    }

    pub fn jet(&self, x: f64, order: usize) -> Jet {
        let ax = x.abs();
        if ax <= self.inner {
            return Jet::constant(1.0, order);
        }
        if ax >= self.outer {
            return Jet::zero(order);
        }
        let width = self.outer - self.inner;
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let t = Jet::variable(x, order).scale(sign).add_scalar(-self.inner).scale(1.0 / width);
        (-smooth_step(t)).add_scalar(1.0)
    }
}

/// Catalog of built-in test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Builtin {
    /// `x^degree`, degree ≤ 8.
    Monomial { degree: u32 },
    /// `Σ coeffs[k] x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `Re 1/(z − x)`.
    ResolventRe { re: f64, im: f64 },
    /// `Im 1/(z − x)`.
    ResolventIm { re: f64, im: f64 },
    /// `exp(a x)`.
    Exp { a: f64 },
    /// `sin(a x)`.
    Sin { a: f64 },
    /// `cos(a x)`.
    Cos { a: f64 },
    /// Cutoff `h`: 1 on `|x| ≤ 2σ+δ`, 0 beyond `2σ+2δ`.
    Plateau { sigma: f64, delta: f64 },
    /// `inner(x) · h(x)` with the plateau cutoff `h`.
    CutOff { inner: Box<Builtin>, sigma: f64, delta: f64 },
    /// `inner(x) · (1 − x²/radius²)^power` on `|x| < radius`, zero outside; `C^{power−1}`.
    PolyBump { inner: Box<Builtin>, radius: f64, power: u32 },
}

pub const MAX_MONOMIAL_DEGREE: u32 = 8;

/// Default distance between the support edge and the start of the cutoff.
pub const DEFAULT_DELTA: f64 = 0.5;

impl Builtin {
    pub fn monomial(degree: u32) -> Self {
        Builtin::Monomial { degree }
    }

    /// `self · h` with the default plateau around `[-2σ, 2σ]`.
    pub fn cut_off(self, sigma: f64) -> Self {
        Builtin::CutOff { inner: Box::new(self), sigma, delta: DEFAULT_DELTA }
    }

    /// `self · (1 − x²/radius²)^8`, a `C⁷` compactly supported function.
    pub fn poly_bump(self, radius: f64) -> Self {
        Builtin::PolyBump { inner: Box::new(self), radius, power: 8 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Builtin::Monomial { degree } if *degree > MAX_MONOMIAL_DEGREE => Err(
                Error::InvalidParameter(format!("monomial degree {degree} exceeds {MAX_MONOMIAL_DEGREE}")),
            ),
            Builtin::Polynomial { coeffs } if coeffs.is_empty() => {
                Err(Error::InvalidParameter("polynomial needs at least one coefficient".into()))
            }
            Builtin::ResolventRe { re, im } | Builtin::ResolventIm { re, im }
                if *im == 0.0 && !re.is_finite() =>
            {
                Err(Error::InvalidParameter("resolvent pole must be finite".into()))
            }
            Builtin::Plateau { sigma, delta } | Builtin::CutOff { sigma, delta, .. }
                if !(*sigma > 0.0 && *delta > 0.0) =>
            {
                Err(Error::InvalidParameter("cutoff needs sigma > 0 and delta > 0".into()))
            }
            Builtin::CutOff { inner, .. } => inner.validate(),
            Builtin::PolyBump { radius, power, .. } if !(*radius > 0.0 && *power >= 2) => {
                Err(Error::InvalidParameter("bump needs radius > 0 and power ≥ 2".into()))
            }
            Builtin::PolyBump { inner, .. } => inner.validate(),
            _ => Ok(()),
        }
    }

    fn monomial_coeffs(degree: u32) -> Vec<f64> {
        let mut c = vec![0.0; degree as usize + 1];
        c[degree as usize] = 1.0;
        c
    }
}

fn resolvent_jet(z: Complex64, x: f64, order: usize, take_im: bool) -> Jet {
    // d^k/dx^k (z − x)^{-1} / k! = (z − x)^{-(k+1)}
    let r = 1.0 / (z - x);
    let mut acc = r;
    let mut coeffs = [0.0; MAX_ORDER + 1];
    for c in coeffs.iter_mut().take(order + 1) {
        *c = if take_im { acc.im } else { acc.re };
        acc *= r;
    }
    Jet::from_coeffs(&coeffs, order)
}

impl TestFunction for Builtin {
    fn name(&self) -> String {
        match self {
            Builtin::Monomial { degree } => format!("x^{degree}"),
            Builtin::Polynomial { coeffs } => format!("poly{coeffs:?}"),
            Builtin::ResolventRe { re, im } => format!("Re 1/(({re}{im:+}i) - x)"),
            Builtin::ResolventIm { re, im } => format!("Im 1/(({re}{im:+}i) - x)"),
            Builtin::Exp { a } => format!("exp({a} x)"),
            Builtin::Sin { a } => format!("sin({a} x)"),
            Builtin::Cos { a } => format!("cos({a} x)"),
            Builtin::Plateau { sigma, delta } => format!("h[sigma={sigma},delta={delta}]"),
            Builtin::CutOff { inner, sigma, delta } => {
                format!("({}) * h[sigma={sigma},delta={delta}]", inner.name())
            }
            Builtin::PolyBump { inner, radius, power } => {
                format!("({}) * (1 - (x/{radius})^2)^{power}", inner.name())
            }
        }
    }

    fn max_order(&self) -> usize {
        match self {
            Builtin::PolyBump { inner, power, .. } => inner.max_order().min(*power as usize - 1),
            Builtin::CutOff { inner, .. } => inner.max_order(),
            _ => MAX_ORDER,
        }
    }

    fn smoothness_class(&self) -> u32 {
        match self {
            Builtin::PolyBump { inner, power, .. } => inner.smoothness_class().min(power - 1),
            Builtin::CutOff { inner, .. } => inner.smoothness_class(),
            _ => SMOOTH,
        }
    }

    fn support_hint(&self) -> Option<(f64, f64)> {
        match self {
            Builtin::Plateau { sigma, delta } | Builtin::CutOff { sigma, delta, .. } => {
                let outer = Plateau::around_support(*sigma, *delta).outer;
                Some((-outer, outer))
            }
            Builtin::PolyBump { radius, .. } => Some((-radius, *radius)),
            _ => None,
        }
    }

    fn jet(&self, x: f64, order: usize) -> Jet {
        match self {
            Builtin::Monomial { degree } => Jet::variable(x, order).powi(*degree),
            Builtin::Polynomial { coeffs } => Jet::polynomial(coeffs, Jet::variable(x, order)),
            Builtin::ResolventRe { re, im } => resolvent_jet(Complex64::new(*re, *im), x, order, false),
            Builtin::ResolventIm { re, im } => resolvent_jet(Complex64::new(*re, *im), x, order, true),
            Builtin::Exp { a } => Jet::variable(x, order).scale(*a).exp(),
            Builtin::Sin { a } => Jet::variable(x, order).scale(*a).sin_cos().0,
            Builtin::Cos { a } => Jet::variable(x, order).scale(*a).sin_cos().1,
            Builtin::Plateau { sigma, delta } => Plateau::around_support(*sigma, *delta).jet(x, order),
            Builtin::CutOff { inner, sigma, delta } => {
                let h = Plateau::around_support(*sigma, *delta).jet(x, order);
                if h.coeffs().iter().all(|&c| c == 0.0) {
                    return h;
                }
                inner.jet(x, order) * h
            }
            Builtin::PolyBump { inner, radius, power } => {
                if x.abs() >= *radius {
                    return Jet::zero(order);
                }
                let t = Jet::variable(x, order).scale(1.0 / radius);
                let b = (-(t * t)).add_scalar(1.0).powi(*power);
                inner.jet(x, order) * b
            }
        }
    }

    fn polynomial_window(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            Builtin::Monomial { degree } => Some((Builtin::monomial_coeffs(*degree), f64::INFINITY)),
            Builtin::Polynomial { coeffs } => Some((coeffs.clone(), f64::INFINITY)),
            Builtin::Plateau { sigma, delta } => {
                Some((vec![1.0], Plateau::around_support(*sigma, *delta).inner))
            }
            Builtin::CutOff { inner, sigma, delta } => {
                let (c, r) = inner.polynomial_window()?;
                Some((c, r.min(Plateau::around_support(*sigma, *delta).inner)))
            }
            _ => None,
        }
    }
}

/// Every built-in kind with representative parameters, for catalog-wide checks.
pub fn catalog(sigma: f64) -> Vec<Builtin> {
    let mut out: Vec<Builtin> = (0..=MAX_MONOMIAL_DEGREE).map(Builtin::monomial).collect();
    out.extend([
        Builtin::Polynomial { coeffs: vec![0.5, -1.0, 0.25, 2.0] },
        Builtin::ResolventRe { re: 2.5 * sigma, im: 0.0 },
        Builtin::ResolventRe { re: 0.3, im: 1.0 },
        Builtin::ResolventIm { re: 0.3, im: 1.0 },
        Builtin::Exp { a: 0.7 },
        Builtin::Sin { a: 1.3 },
        Builtin::Cos { a: 0.9 },
        Builtin::Plateau { sigma, delta: DEFAULT_DELTA },
        Builtin::monomial(3).cut_off(sigma),
        Builtin::Exp { a: 1.0 }.cut_off(sigma),
        Builtin::monomial(1).poly_bump(3.0 * sigma),
    ]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn monomial_derivatives() {
        let f = Builtin::monomial(5);
        assert_relative_eq!(f.eval(1.5), 1.5f64.powi(5));
        assert_relative_eq!(f.derivative(3, 1.5).unwrap(), 60.0 * 1.5 * 1.5);
        assert_eq!(f.derivative(6, 1.5).unwrap(), 0.0);
        assert!(matches!(f.derivative(MAX_ORDER + 1, 0.0), Err(Error::DerivativeOrder { .. })));
    }

    #[test]
    fn plateau_shape() {
        let h = Builtin::Plateau { sigma: 1.0, delta: 0.5 };
        assert_eq!(h.eval(0.0), 1.0);
        assert_eq!(h.eval(2.5), 1.0);
        assert_eq!(h.eval(-2.5), 1.0);
        assert_eq!(h.eval(3.0), 0.0);
        assert_eq!(h.eval(-7.0), 0.0);
        assert_relative_eq!(h.eval(2.75), 0.5, epsilon = 1e-15);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = h.eval(2.5 + 0.005 * k as f64);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert_eq!(h.support_hint(), Some((-3.0, 3.0)));
    }

    #[test]
    fn plateau_is_even() {
        let h = Builtin::Plateau { sigma: 1.0, delta: 0.5 };
        for &x in &[2.6, 2.7, 2.85, 2.95] {
            for k in 0..6 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let a = h.derivative(k, x).unwrap();
                let b = h.derivative(k, -x).unwrap();
                assert!((a - sign * b).abs() <= 1e-9 * (1.0 + a.abs()), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn resolvent_function_values() {
        let f = Builtin::ResolventRe { re: 2.5, im: 0.0 };
        assert_relative_eq!(f.eval(0.5), 0.5);
        assert_relative_eq!(f.derivative(1, 0.5).unwrap(), 0.25);
        let g = Builtin::ResolventIm { re: 0.0, im: 1.0 };
        assert_relative_eq!(g.eval(0.0), -1.0);
    }

    #[test]
    fn polynomial_windows() {
        let f = Builtin::monomial(3).cut_off(1.0);
        let (c, r) = f.polynomial_window().unwrap();
        assert_eq!(c, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(r, 2.5);
        assert!(Builtin::Exp { a: 1.0 }.polynomial_window().is_none());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let sigma = 1.0;
        let span = 2.0 * sigma + DEFAULT_DELTA;
        for f in catalog(sigma) {
            for i in 0..=40 {
                let x = -span + 2.0 * span * i as f64 / 40.0;
                // avoid the real pole of the resolvent family
                if matches!(f, Builtin::ResolventRe { im, .. } if im == 0.0) && (x - 2.5).abs() < 0.2 {
                    continue;
                }
                for k in 1..=f.max_order().min(8) {
                    let h = 1e-5;
                    let fd = (f.derivative(k - 1, x + h).unwrap() - f.derivative(k - 1, x - h).unwrap())
                        / (2.0 * h);
                    let d = f.derivative(k, x).unwrap();
                    let scale = d.abs().max(f.derivative(k - 1, x).unwrap().abs()).max(1.0);
                    assert!(
                        (fd - d).abs() <= 1e-5 * scale,
                        "{} k={k} x={x}: fd={fd} d={d}",
                        f.name()
                    );
                }
            }
        }
    }

    #[test]
    fn transition_derivatives_match_finite_differences() {
        let f = Builtin::monomial(3).cut_off(1.0);
        for i in 1..40 {
            let x = 2.5 + 0.5 * i as f64 / 40.0;
            for k in 1..=5 {
                let h = 1e-5;
                let fd = (f.derivative(k - 1, x + h).unwrap() - f.derivative(k - 1, x - h).unwrap())
                    / (2.0 * h);
                let d = f.derivative(k, x).unwrap();
                assert!((fd - d).abs() <= 1e-4 * d.abs().max(1.0), "k={k} x={x}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let f = Builtin::Sin { a: 2.0 }.cut_off(1.0);
        let s = serde_json::to_string(&f).unwrap();
        let back: Builtin = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
        assert!(Builtin::monomial(9).validate().is_err());
    }
}
