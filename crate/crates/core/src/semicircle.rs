//! Semicircle law analytics: density, Stieltjes transform, two-point φ-kernels,
//! moments, and Gauss–Chebyshev quadrature against the semicircle weight.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::functions::TestFunction;
use crate::{Error, Result};

/// Default number of quadrature nodes.
pub const DEFAULT_NODES: usize = 2048;

/// Relative distance below which φ(z, w) switches to the confluent value −g'(z).
pub const CONFLUENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    sigma: f64,
}

impl SpectralParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn unit() -> Self {
        Self { sigma: 1.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn edge(&self) -> f64 {
        2.0 * self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub z: Complex64,
}

impl SpectralPoint {
    pub fn new(re: f64, im: f64) -> Self {
        Self { z: Complex64::new(re, im) }
    }

    pub fn real(x: f64) -> Self {
        Self::new(x, 0.0)
    }

    pub fn conj(&self) -> Self {
        Self { z: self.z.conj() }
    }

    pub fn on_cut(&self, p: &SpectralParams) -> bool {
        self.z.im == 0.0 && self.z.re.abs() <= p.edge()
    }

    fn check(&self, p: &SpectralParams) -> Result<Complex64> {
        if self.on_cut(p) || !self.z.re.is_finite() || !self.z.im.is_finite() {
            Err(Error::OnCut { re: self.z.re, im: self.z.im, sigma: p.sigma })
        } else {
            Ok(self.z)
        }
    }
}

impl From<Complex64> for SpectralPoint {
    fn from(z: Complex64) -> Self {
        Self { z }
    }
}

impl From<f64> for SpectralPoint {
    fn from(x: f64) -> Self {
        Self::real(x)
    }
}

/// Gauss–Chebyshev rule of the second kind mapped onto the semicircle law.
///
/// Nodes `2σ cos(kπ/(n+1))`, weights `2/(n+1) · sin²(kπ/(n+1))`; exact for
/// polynomials of degree `≤ 2n − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    node_count: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(node_count: usize, p: &SpectralParams) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidParameter("node_count must be positive".into()));
        }
        let h = PI / (node_count as f64 + 1.0);
        let scale = 2.0 / (node_count as f64 + 1.0);
        let (nodes, weights) = (1..=node_count)
            .map(|k| {
                let theta = k as f64 * h;
                let s = theta.sin();
                (p.edge() * theta.cos(), scale * s * s)
            })
            .unzip();
        Ok(Self { node_count, nodes, weights })
    }

    pub fn default_for(p: &SpectralParams) -> Self {
        Self::new(DEFAULT_NODES, p).expect("default node count is positive")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn expect_complex(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| f(x) * w).sum()
    }
}

pub fn density(x: f64, p: &SpectralParams) -> f64 {
    let s2 = p.sigma2();
    let r = 4.0 * s2 - x * x;
    if r <= 0.0 {
        0.0
    } else {
        r.sqrt() / (2.0 * PI * s2)
    }
}

/// Stieltjes transform `g(z) = ∫ (z − x)^{-1} dμ_sc(x)`, the root of `σ²g² − zg + 1 = 0`
/// that decays at infinity.
pub fn stieltjes_g(z: SpectralPoint, p: &SpectralParams) -> Result<Complex64> {
    let z = z.check(p)?;
    Ok(g_unchecked(z, p.sigma2()))
}

fn g_unchecked(z: Complex64, s2: f64) -> Complex64 {
    // z·sqrt(1 − 4σ²/z²) picks the decaying branch everywhere off the cut;
    // 2/(z + s) avoids the cancellation of (z − s)/(2σ²) for large |z|.
    let s = z * (Complex64::new(1.0, 0.0) - 4.0 * s2 / (z * z)).sqrt();
    2.0 / (z + s)
}

pub fn stieltjes_g_prime(z: SpectralPoint, p: &SpectralParams) -> Result<Complex64> {
    let g = stieltjes_g(z, p)?;
    Ok(g_prime_from_g(g, p.sigma2()))
}

fn g_prime_from_g(g: Complex64, s2: f64) -> Complex64 {
    let g2 = g * g;
    g2 / (s2 * g2 - 1.0)
}

/// `φ(z, w) = −(g(w) − g(z))/(w − z) = ∫ dμ_sc(x) / ((z − x)(w − x))`.
pub fn phi(z: SpectralPoint, w: SpectralPoint, p: &SpectralParams) -> Result<Complex64> {
    let zc = z.check(p)?;
    let wc = w.check(p)?;
    let s2 = p.sigma2();
    let gz = g_unchecked(zc, s2);
    if (zc - wc).norm() < CONFLUENCE_TOL * zc.norm().max(1.0) {
        return Ok(-g_prime_from_g(gz, s2));
    }
    let gw = g_unchecked(wc, s2);
    Ok(-(gw - gz) / (wc - zc))
}

fn phi_quad(z: SpectralPoint, w: SpectralPoint, p: &SpectralParams) -> Result<[Complex64; 4]> {
    Ok([
        phi(z, w, p)?,
        phi(z.conj(), w.conj(), p)?,
        phi(z.conj(), w, p)?,
        phi(z, w.conj(), p)?,
    ])
}

/// `E[Re (z − η)^{-1} · Re (w − η)^{-1}]`.
pub fn phi_pp(z: SpectralPoint, w: SpectralPoint, p: &SpectralParams) -> Result<f64> {
    let [a, b, c, d] = phi_quad(z, w, p)?;
    Ok((0.25 * (a + b + c + d)).re)
}

/// `E[Im (z − η)^{-1} · Im (w − η)^{-1}]`.
pub fn phi_mm(z: SpectralPoint, w: SpectralPoint, p: &SpectralParams) -> Result<f64> {
    let [a, b, c, d] = phi_quad(z, w, p)?;
    Ok((-0.25 * (a + b - c - d)).re)
}

/// `E[Re (z − η)^{-1} · Im (w − η)^{-1}]`.
pub fn phi_pm(z: SpectralPoint, w: SpectralPoint, p: &SpectralParams) -> Result<f64> {
    let [a, b, c, d] = phi_quad(z, w, p)?;
    Ok((Complex64::new(0.0, -0.25) * (a + c - b - d)).re)
}

/// The three kernels before discarding the imaginary residue, for diagnostics.
pub fn phi_kernels_raw(
    z: SpectralPoint,
    w: SpectralPoint,
    p: &SpectralParams,
) -> Result<[Complex64; 3]> {
    let [a, b, c, d] = phi_quad(z, w, p)?;
    Ok([
        0.25 * (a + b + c + d),
        -0.25 * (a + b - c - d),
        Complex64::new(0.0, -0.25) * (a + c - b - d),
    ])
}

pub fn semicircle_expect(f: &dyn TestFunction, q: &QuadratureRule) -> f64 {
    q.expect(|x| f.eval(x))
}

pub fn catalan(m: u32) -> u128 {
    // C_{k+1} = C_k · 2(2k+1)/(k+2), exact in integers
    let mut c: u128 = 1;
    for k in 0..m as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

pub fn semicircle_moment(k: u32, p: &SpectralParams) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        catalan(k / 2) as f64 * p.sigma.powi(k as i32)
    }
}
