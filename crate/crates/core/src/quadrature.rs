//! Gauss rules built with the Golub–Welsch algorithm, plus composite panels.

use faer::{Mat, Side};

use crate::{Error, Result};

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Affinely maps a rule on `[-1, 1]` to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> GaussRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: self.nodes.iter().map(|&t| mid + half * t).collect(),
            weights: self.weights.iter().map(|&w| half * w).collect(),
        }
    }
}

/// Golub–Welsch: eigen-decomposition of the Jacobi matrix of a three-term recurrence.
///
/// `alpha[k]` are the diagonal entries, `beta[k]` (k ≥ 1) the squared off-diagonals,
/// and `mu0` the total mass of the weight.
fn golub_welsch(alpha: &[f64], beta: &[f64], mu0: f64) -> Result<GaussRule> {
    let n = alpha.len();
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
    }
    let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[i].sqrt()
        } else if j == i + 1 {
            beta[j].sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("Golub-Welsch eigensolver failed: {e:?}")))?;
    let u = eig.U();
    let s = eig.S();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = u[(0, k)];
            (s[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Gauss–Hermite for the standard normal density; weights sum to 1.
pub fn gauss_hermite_prob(n: usize) -> Result<GaussRule> {
    let alpha = vec![0.0; n];
    let beta: Vec<f64> = (0..n).map(|k| k as f64).collect();
    golub_welsch(&alpha, &beta, 1.0)
}

/// Gauss–Legendre on `[-1, 1]`; weights sum to 2.
pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    let alpha = vec![0.0; n];
    let beta: Vec<f64> = (0..n)
        .map(|k| {
            let k = k as f64;
            k * k / (4.0 * k * k - 1.0)
        })
        .collect();
    golub_welsch(&alpha, &beta, 2.0)
}

/// Gauss–Laguerre for the weight `e^{-x}` on `[0, ∞)`.
pub fn gauss_laguerre(n: usize) -> Result<GaussRule> {
    let alpha: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + 1.0).collect();
    let beta: Vec<f64> = (0..n).map(|k| (k * k) as f64).collect();
    golub_welsch(&alpha, &beta, 1.0)
}

/// Composite rule: `panels` equal panels of an `order`-point Gauss–Legendre rule on `[a, b]`.
pub fn composite_legendre(a: f64, b: f64, panels: usize, order: usize) -> Result<GaussRule> {
    let base = gauss_legendre(order)?;
    composite_from_breaks(&base, &linspace(a, b, panels + 1))
}

/// Composite rule over consecutive break points.
pub fn composite_from_breaks(base: &GaussRule, breaks: &[f64]) -> Result<GaussRule> {
    if breaks.len() < 2 {
        return Err(Error::InvalidParameter("need at least two break points".into()));
    }
    let mut out = GaussRule { nodes: Vec::new(), weights: Vec::new() };
    for w in breaks.windows(2) {
        let panel = base.mapped(w[0], w[1]);
        out.nodes.extend(panel.nodes);
        out.weights.extend(panel.weights);
    }
    Ok(out)
}

pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count).map(|k| a + (b - a) * k as f64 / (count - 1) as f64).collect()
}
