//! Lanczos with full reorthogonalization.
//!
//! Several start vectors advance in lockstep so each step costs a single block
//! product with the matrix. Shifted systems `(z − A) x = v` are then solved in the
//! Krylov basis for any number of shifts (FOM); the tridiagonal matrix is real even
//! for Hermitian `A`.

use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::scalar::Field;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    /// Stop once the FOM residual is below `tol · ‖v‖` at every requested shift.
    pub tol: f64,
    /// Upper bound on the basis size; `0` means the matrix dimension.
    pub max_steps: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { tol: 1e-13, max_steps: 0 }
    }
}

/// Orthonormal Krylov basis of one start vector with its Lanczos coefficients.
#[derive(Debug, Clone)]
pub struct LanczosBasis<T> {
    pub vectors: Vec<Vec<T>>,
    pub alpha: Vec<f64>,
    /// `beta[k]` couples basis vectors `k` and `k + 1`.
    pub beta: Vec<f64>,
    pub start_norm: f64,
    /// Worst FOM residual over the shifts at termination.
    pub residual: f64,
}

impl<T: Field> LanczosBasis<T> {
    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    /// Coordinates `y` with `(z − A)⁻¹ v ≈ Σ_k y_k v_k`.
    pub fn shifted_solve(&self, z: Complex64) -> Result<Vec<Complex64>> {
        tridiagonal_solve(&self.alpha, &self.beta, z, self.start_norm)
    }

    /// Component `i` of `Σ_k y_k v_k`.
    pub fn component(&self, y: &[Complex64], i: usize) -> Complex64 {
        self.vectors.iter().zip(y).map(|(v, &yk)| v[i].mul_c(yk)).sum()
    }

    /// `⟨u, Σ_k y_k v_k⟩`, conjugate-linear in `u`.
    pub fn form(&self, u: &[T], y: &[Complex64]) -> Complex64 {
        self.vectors.iter().zip(y).map(|(v, &yk)| dot(u, v).to_c() * yk).sum()
    }
}

/// `Σ conj(a_i) b_i`.
pub fn dot<T: Field>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

fn norm<T: Field>(a: &[T]) -> f64 {
    a.iter().map(|x| x.abs2()).sum::<f64>().sqrt()
}

/// Solves `(z − T) y = s·e₁` for the symmetric tridiagonal `T` by elimination without pivoting.
fn tridiagonal_solve(alpha: &[f64], beta: &[f64], z: Complex64, s: f64) -> Result<Vec<Complex64>> {
    let k = alpha.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut diag: Vec<Complex64> = alpha.iter().map(|&a| z - a).collect();
    let mut rhs = vec![Complex64::new(0.0, 0.0); k];
    rhs[0] = Complex64::new(s, 0.0);
    for i in 1..k {
        if diag[i - 1].norm() < 1e-300 {
            return Err(Error::NearSingular(format!("shifted tridiagonal pivot vanished at z = {z}")));
        }
        // Off-diagonals of z − T are −β.
        let l = Complex64::new(-beta[i - 1], 0.0) / diag[i - 1];
        diag[i] -= l * (-beta[i - 1]);
        let r = rhs[i - 1];
        rhs[i] -= l * r;
    }
    let mut y = vec![Complex64::new(0.0, 0.0); k];
    for i in (0..k).rev() {
        let mut acc = rhs[i];
        if i + 1 < k {
            acc += beta[i] * y[i + 1];
        }
        if diag[i].norm() < 1e-300 {
            return Err(Error::NearSingular(format!("shifted tridiagonal pivot vanished at z = {z}")));
        }
        y[i] = acc / diag[i];
    }
    Ok(y)
}

struct Run<T> {
    basis: LanczosBasis<T>,
    done: bool,
}

/// Builds one Krylov basis per start vector, stopping each independently once the
/// FOM residual at every shift in `shifts` meets `cfg.tol`.
pub fn lanczos_block<T: Field>(
    a: MatRef<'_, T>,
    starts: &[Vec<T>],
    shifts: &[Complex64],
    cfg: &KrylovConfig,
) -> Result<Vec<LanczosBasis<T>>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} operator is not square", n, a.ncols())));
    }
    let max_steps = if cfg.max_steps == 0 { n } else { cfg.max_steps.min(n) };
    let mut runs: Vec<Run<T>> = starts
        .iter()
        .map(|s| {
            if s.len() != n {
                return Err(Error::DimensionMismatch(format!("start vector has length {}, expected {n}", s.len())));
            }
            let nrm = norm(s);
            let vectors = if nrm > 0.0 { vec![s.iter().map(|&x| x.scale(1.0 / nrm)).collect()] } else { vec![] };
            Ok(Run {
                basis: LanczosBasis { vectors, alpha: vec![], beta: vec![], start_norm: nrm, residual: 0.0 },
                done: nrm == 0.0 || n == 0,
            })
        })
        .collect::<Result<_>>()?;

    loop {
        let active: Vec<usize> = (0..runs.len()).filter(|&r| !runs[r].done).collect();
        if active.is_empty() {
            break;
        }
        let block = Mat::<T>::from_fn(n, active.len(), |i, c| {
            runs[active[c]].basis.vectors.last().expect("active run has a vector")[i]
        });
        let product = a * block.as_ref();
        for (c, &r) in active.iter().enumerate() {
            let run = &mut runs[r];
            let b = &mut run.basis;
            let k = b.vectors.len() - 1;
            let mut w: Vec<T> = (0..n).map(|i| product[(i, c)]).collect();
            let alpha = dot(&b.vectors[k], &w).re();
            for i in 0..n {
                w[i] -= b.vectors[k][i].scale(alpha);
                if k > 0 {
                    w[i] -= b.vectors[k - 1][i].scale(b.beta[k - 1]);
                }
            }
            // Two passes of classical Gram–Schmidt against the whole basis.
            for _ in 0..2 {
                for v in &b.vectors {
                    let h = dot(v, &w);
                    for i in 0..n {
                        w[i] -= v[i] * h;
                    }
                }
            }
            let beta = norm(&w);
            b.alpha.push(alpha);
            let scale = alpha.abs() + beta + b.beta.last().copied().unwrap_or(0.0);
            let mut residual = 0.0f64;
            for &z in shifts {
                let y = tridiagonal_solve(&b.alpha, &b.beta, z, b.start_norm)?;
                residual = residual.max(beta * y[k].norm());
            }
            b.residual = residual;
            let invariant = beta <= 1e-14 * scale.max(f64::MIN_POSITIVE);
            if invariant || residual <= cfg.tol * b.start_norm || b.alpha.len() >= max_steps {
                if !invariant && residual > cfg.tol * b.start_norm && b.alpha.len() < n {
                    return Err(Error::Numeric(format!(
                        "Krylov solve stalled after {} steps with residual {residual:e}",
                        b.alpha.len()
                    )));
                }
                run.done = true;
            } else {
                b.beta.push(beta);
                b.vectors.push(w.iter().map(|&x| x.scale(1.0 / beta)).collect());
            }
        }
    }
    Ok(runs.into_iter().map(|r| r.basis).collect())
}
