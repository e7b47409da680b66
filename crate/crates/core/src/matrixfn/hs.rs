//! Helffer–Sjöstrand reconstruction of `f(X)` from resolvents.
//!
//! `f(X) = −(1/π) ∬ ∂̄f̃(x+iy) (z − X)⁻¹ dx dy` with the almost-analytic extension
//! `f̃(x+iy) = (Σ_{n≤l} f⁽ⁿ⁾(x)(iy)ⁿ/n!) σ̃(y)`. Writing `(z − X)⁻¹ = Σ_k u_k u_k*/(z − λ_k)`
//! reduces the planar integral to one scalar transform per eigenvalue, evaluated on
//! a tensor Gauss–Legendre grid that omits the band `|y| < y_min`.

use faer::{c64, Mat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::WignerSample;
use crate::functions::{Plateau, TestFunction};
use crate::jet::{factorial, Jet};
use crate::quadrature::{composite_from_breaks, gauss_legendre, linspace, GaussRule};
use crate::{Error, Result};

/// Gauss–Legendre order of every panel.
const PANEL_ORDER: usize = 10;

/// The y-cutoff: 1 on `|y| ≤ 1/2`, 0 on `|y| ≥ 1`.
const PROFILE: Plateau = Plateau { inner: 0.5, outer: 1.0 };

#[derive(Debug, Clone)]
pub struct AlmostAnalyticExtension<F> {
    f: F,
    order_l: usize,
}

impl<F: TestFunction> AlmostAnalyticExtension<F> {
    /// Requires `1 ≤ order_l ≤ f.max_order() − 1`.
    pub fn new(f: F, order_l: usize) -> Result<Self> {
        if order_l == 0 || order_l + 1 > f.max_order() {
            return Err(Error::DerivativeOrder { name: f.name(), requested: order_l + 1, max: f.max_order() });
        }
        Ok(Self { f, order_l })
    }

    pub fn order(&self) -> usize {
        self.order_l
    }

    pub fn function(&self) -> &F {
        &self.f
    }

    /// `(σ̃(y), σ̃′(y))`.
    pub fn profile(y: f64) -> (f64, f64) {
        let j = PROFILE.jet(y, 1);
        (j.value(), j.derivative(1))
    }

    fn taylor(jet: &Jet, l: usize, y: f64) -> Complex64 {
        let iy = Complex64::new(0.0, y);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        for n in 0..=l {
            acc += jet.coeff(n) * pow;
            pow *= iy;
        }
        acc
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        let jet = self.f.jet(z.re, self.order_l);
        Self::taylor(&jet, self.order_l, z.im) * Self::profile(z.im).0
    }

    fn dbar_from_jet(jet: &Jet, l: usize, y: f64) -> Complex64 {
        let (s, ds) = Self::profile(y);
        if s == 0.0 && ds == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let iy = Complex64::new(0.0, y);
        // f^(l+1)(x)(iy)^l / l! = (l+1)·c_{l+1}·(iy)^l with Taylor coefficients c_n.
        let top = (l as f64 + 1.0) * jet.coeff(l + 1) * iy.powu(l as u32) * s;
        let sum = if ds == 0.0 { Complex64::new(0.0, 0.0) } else { Self::taylor(jet, l, y) * Complex64::new(0.0, ds) };
        0.5 * (sum + top)
    }

    /// `∂̄f̃ = ½(∂_x + i∂_y) f̃`.
    pub fn dbar(&self, z: Complex64) -> Complex64 {
        let jet = self.f.jet(z.re, self.order_l + 1);
        Self::dbar_from_jet(&jet, self.order_l, z.im)
    }

    fn support(&self) -> Result<(f64, f64)> {
        match self.f.support_hint() {
            Some((a, b)) if a.is_finite() && b.is_finite() && a < b => Ok((a, b)),
            _ => Err(Error::Contract(format!("{} is not compactly supported", self.f.name()))),
        }
    }
}

/// Tensor grid: `nx` nodes across the support, `ny` nodes on each of `±[y_min, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsGrid {
    pub nx: usize,
    pub ny: usize,
    pub y_min: f64,
}

impl Default for HsGrid {
    fn default() -> Self {
        Self { nx: 400, ny: 400, y_min: 1e-4 }
    }
}

impl HsGrid {
    pub fn square(nodes: usize) -> Self {
        Self { nx: nodes, ny: nodes, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.nx < PANEL_ORDER || self.ny < 2 * PANEL_ORDER || !(self.y_min > 0.0 && self.y_min < 0.5) {
            return Err(Error::InvalidParameter(format!("unusable grid {self:?}")));
        }
        Ok(())
    }

    fn x_rule(&self, a: f64, b: f64) -> Result<GaussRule> {
        let base = gauss_legendre(PANEL_ORDER)?;
        composite_from_breaks(&base, &linspace(a, b, self.nx / PANEL_ORDER + 1))
    }

    /// Positive half; panels split at the plateau edge `1/2` of the profile.
    fn y_rule(&self) -> Result<GaussRule> {
        let base = gauss_legendre(PANEL_ORDER)?;
        let per_side = (self.ny / (2 * PANEL_ORDER)).max(1);
        let mut lower = composite_from_breaks(&base, &linspace(self.y_min, 0.5, per_side + 1))?;
        let upper = composite_from_breaks(&base, &linspace(0.5, 1.0, per_side + 1))?;
        lower.nodes.extend(upper.nodes);
        lower.weights.extend(upper.weights);
        Ok(lower)
    }
}

/// Grid nodes `z` with weights `−(1/π)·w·∂̄f̃(z)`.
fn weighted_nodes<F: TestFunction>(
    ext: &AlmostAnalyticExtension<F>,
    xr: &GaussRule,
    yr: &GaussRule,
) -> Vec<(Complex64, Complex64)> {
    let l = ext.order_l;
    let mut out = Vec::with_capacity(2 * xr.len() * yr.len());
    for (&x, &wx) in xr.nodes.iter().zip(&xr.weights) {
        let jet = ext.f.jet(x, l + 1);
        for (&y, &wy) in yr.nodes.iter().zip(&yr.weights) {
            for sy in [y, -y] {
                let d = AlmostAnalyticExtension::<F>::dbar_from_jet(&jet, l, sy);
                if d != Complex64::new(0.0, 0.0) {
                    out.push((Complex64::new(x, sy), -std::f64::consts::FRAC_1_PI * wx * wy * d));
                }
            }
        }
    }
    out
}

fn transform(nodes: &[(Complex64, Complex64)], lambda: f64) -> Complex64 {
    nodes.iter().map(|&(z, w)| w / (z - lambda)).sum()
}

/// Scalar transforms `F(λ_k)`, which equal `f(λ_k)` in the limit, together with a
/// Richardson estimate of the omitted band `|y| < y_min`.
pub fn hs_transform<F: TestFunction>(
    ext: &AlmostAnalyticExtension<F>,
    grid: &HsGrid,
    lambdas: &[f64],
) -> Result<(Vec<Complex64>, f64)> {
    grid.validate()?;
    let (a, b) = ext.support()?;
    let xr = grid.x_rule(a, b)?;
    let nodes = weighted_nodes(ext, &xr, &grid.y_rule()?);
    let values = lambdas.iter().map(|&l| transform(&nodes, l)).collect();
    // Near the axis the integrand scales like |y|^(l−1), so the band [0, y_min]
    // carries 1/(2^l − 1) of the strip [y_min, 2 y_min].
    let strip = gauss_legendre(PANEL_ORDER)?.mapped(grid.y_min, 2.0 * grid.y_min);
    let strip_nodes = weighted_nodes(ext, &xr, &strip);
    let ratio = 1.0 / (2f64.powi(ext.order_l as i32) - 1.0);
    let band = lambdas.iter().map(|&l| transform(&strip_nodes, l).norm() * ratio).fold(0.0, f64::max);
    Ok((values, band))
}

#[derive(Debug, Clone)]
pub struct HsReconstruction {
    pub entries: Mat<c64>,
    /// Estimated size of the omitted band contribution per eigenvalue.
    pub band_estimate: f64,
    pub grid: HsGrid,
}

/// Top-left `m × m` block of `f(X)` rebuilt from the resolvent.
pub fn hs_reconstruct_entries<F: TestFunction>(
    x: &WignerSample,
    ext: &AlmostAnalyticExtension<F>,
    m: usize,
    grid: &HsGrid,
) -> Result<HsReconstruction> {
    super::check_block(m, x.n())?;
    let entries = super::spectral_apply(x, m, |lambdas| hs_transform(ext, grid, lambdas))?;
    Ok(HsReconstruction { entries: entries.0, band_estimate: entries.1, grid: *grid })
}

/// `max |∂̄f̃| / (‖f‖_{C^{l+1}} |y|^l)` over the grid, with the norm taken over the x-nodes.
pub fn dbar_bound_ratio<F: TestFunction>(ext: &AlmostAnalyticExtension<F>, grid: &HsGrid) -> Result<f64> {
    grid.validate()?;
    let (a, b) = ext.support()?;
    let xr = grid.x_rule(a, b)?;
    let yr = grid.y_rule()?;
    let l = ext.order_l;
    let mut norm = 0.0f64;
    let mut worst = 0.0f64;
    for &x in &xr.nodes {
        let jet = ext.f.jet(x, l + 1);
        for k in 0..=l + 1 {
            norm = norm.max(jet.derivative(k).abs());
        }
        for &y in &yr.nodes {
            let d = AlmostAnalyticExtension::<F>::dbar_from_jet(&jet, l, y).norm();
            worst = worst.max(d / y.powi(l as i32));
        }
    }
    Ok(if norm == 0.0 { 0.0 } else { worst / norm })
}

/// A bound on [`dbar_bound_ratio`] that depends only on `l` and the profile.
pub fn dbar_bound_constant(order_l: usize) -> f64 {
    let slope = linspace(0.5, 1.0, 2001)
        .into_iter()
        .map(|y| AlmostAnalyticExtension::<crate::functions::Builtin>::profile(y).1.abs())
        .fold(0.0, f64::max);
    let l = order_l as i32;
    let taylor: f64 = (0..=order_l).map(|n| 1.0 / factorial(n)).sum();
    0.5 * 2f64.powi(l) * (taylor * slope + 1.0 / factorial(order_l))
}
