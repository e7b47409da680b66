//! Matrix entries of `f(X)` and of the resolvent `R(z) = (zI − X)⁻¹`.
//!
//! Three independent paths: the spectral decomposition, direct linear solves
//! (dense LU or Krylov), and the Helffer–Sjöstrand reconstruction in [`hs`].
//! The Schur-complement field of the top-left corner lives here as well.

pub mod hs;
pub mod krylov;

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, MatRef};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Spectral, Wigner, WignerSample};
use crate::functions::TestFunction;
use crate::scalar::Field;
use crate::semicircle::{stieltjes_g, SpectralParams, SpectralPoint};
use crate::{Error, Result};

pub use hs::{dbar_bound_ratio, hs_reconstruct_entries, AlmostAnalyticExtension, HsGrid, HsReconstruction};
pub use krylov::KrylovConfig;

/// Distance to the spectrum below which a resolvent is refused.
pub const NEAR_SINGULAR_TOL: f64 = 1e-12;

/// Finite-difference step of [`resolvent_derivative_check`].
pub const FD_STEP: f64 = 1e-6;

/// Dispatches a generic body over the two scalar types of a [`WignerSample`].
macro_rules! with_wigner {
    ($x:expr, $w:ident => $body:expr) => {
        match $x {
            WignerSample::Real($w) => $body,
            WignerSample::Hermitian($w) => $body,
        }
    };
}

fn check_block(m: usize, n: usize) -> Result<()> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("block size {m} must lie in 1..={n}")));
    }
    Ok(())
}

/// `Σ_k v_k u_ik conj(u_jk)` over the top-left `m × m` block.
fn spectral_block<T: Field>(s: &Spectral<T>, values: &[Complex64], m: usize) -> Mat<c64> {
    let u = &s.vectors;
    Mat::from_fn(m, m, |i, j| {
        let mut acc = c64::new(0.0, 0.0);
        for (k, &v) in values.iter().enumerate() {
            acc += u[(i, k)].mul_c(v) * u[(j, k)].conj().to_c();
        }
        acc
    })
}

/// Maps eigenvalues to values with `eval` and assembles the top-left `m × m` block.
pub(crate) fn spectral_apply<E>(
    x: &WignerSample,
    m: usize,
    eval: impl FnOnce(&[f64]) -> Result<(Vec<Complex64>, E)>,
) -> Result<(Mat<c64>, E)> {
    check_block(m, x.n())?;
    with_wigner!(x, w => {
        let s = w.spectral()?;
        let (values, extra) = eval(&s.eigenvalues)?;
        Ok((spectral_block(s, &values, m), extra))
    })
}

/// Top-left `m × m` block of `f(X)` through the eigen-decomposition.
pub fn apply_function_entries(x: &WignerSample, f: &dyn TestFunction, m: usize) -> Result<Mat<c64>> {
    let values = |ls: &[f64]| Ok((ls.iter().map(|&l| Complex64::new(f.eval(l), 0.0)).collect(), ()));
    Ok(spectral_apply(x, m, values)?.0)
}

/// `p(A)·[e_0 … e_{m−1}]` by Horner's rule; `coeffs[k]` multiplies `x^k`.
fn polynomial_columns<T: Field>(a: MatRef<'_, T>, coeffs: &[f64], m: usize) -> Mat<T> {
    let n = a.nrows();
    let degree = coeffs.iter().rposition(|&c| c != 0.0);
    let Some(d) = degree else {
        return Mat::zeros(n, m);
    };
    let mut v = Mat::<T>::from_fn(n, m, |i, j| if i == j { T::from_re(coeffs[d]) } else { T::zero() });
    for &c in coeffs[..d].iter().rev() {
        v = a * v.as_ref();
        if c != 0.0 {
            for j in 0..m {
                v[(j, j)] += T::from_re(c);
            }
        }
    }
    v
}

/// Top-left `m × m` block of `p(X)` with `O(deg · n² · m)` work and no decomposition.
pub fn apply_polynomial_entries(x: &WignerSample, coeffs: &[f64], m: usize) -> Result<Mat<c64>> {
    check_block(m, x.n())?;
    with_wigner!(x, w => {
        let cols = polynomial_columns(w.matrix().as_ref(), coeffs, m);
        Ok(Mat::from_fn(m, m, |i, j| cols[(i, j)].to_c()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionPath {
    Polynomial,
    Spectral,
}

/// Polynomial path when `f` agrees with a polynomial on a window that certifiably
/// contains the spectrum, spectral path otherwise.
pub fn apply_function_entries_auto(
    x: &WignerSample,
    f: &dyn TestFunction,
    m: usize,
) -> Result<(Mat<c64>, FunctionPath)> {
    if let Some((coeffs, radius)) = f.polynomial_window() {
        if radius.is_infinite() || x.spectrum_within(radius) {
            return Ok((apply_polynomial_entries(x, &coeffs, m)?, FunctionPath::Polynomial));
        }
    }
    Ok((apply_function_entries(x, f, m)?, FunctionPath::Spectral))
}

/// Resolvent entries `R_ij(z)` at one spectral point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventRequest {
    pub z: SpectralPoint,
    pub indices: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventMethod {
    Spectral,
    Dense,
    Krylov,
}

fn check_not_singular(x: &WignerSample, z: Complex64) -> Result<()> {
    if z.im.abs() >= NEAR_SINGULAR_TOL {
        return Ok(());
    }
    let dist = x.eigenvalues()?.iter().map(|&l| (z - l).norm()).fold(f64::INFINITY, f64::min);
    if dist < NEAR_SINGULAR_TOL {
        return Err(Error::NearSingular(format!("z = {z} lies within {dist:e} of an eigenvalue")));
    }
    Ok(())
}

fn distinct_columns(indices: &[(usize, usize)]) -> Vec<usize> {
    let mut cols: Vec<usize> = indices.iter().map(|&(_, j)| j).collect();
    cols.sort_unstable();
    cols.dedup();
    cols
}

/// `zI − A` promoted to complex.
fn shifted_complex<T: Field>(a: MatRef<'_, T>, z: Complex64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        let v = -a[(i, j)].to_c();
        if i == j {
            v + z
        } else {
            v
        }
    })
}

fn resolvent_dense<T: Field>(a: MatRef<'_, T>, z: Complex64, indices: &[(usize, usize)]) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let cols = distinct_columns(indices);
    let rhs = Mat::<c64>::from_fn(n, cols.len(), |i, c| if i == cols[c] { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
    let lu = shifted_complex(a, z).partial_piv_lu();
    let sol = faer::linalg::solvers::Solve::solve(&lu, rhs.as_ref());
    Ok(indices
        .iter()
        .map(|&(i, j)| sol[(i, cols.binary_search(&j).expect("column present"))])
        .collect())
}

fn resolvent_krylov<T: Field>(a: MatRef<'_, T>, z: Complex64, indices: &[(usize, usize)]) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let cols = distinct_columns(indices);
    let starts: Vec<Vec<T>> =
        cols.iter().map(|&j| (0..n).map(|i| if i == j { T::one() } else { T::zero() }).collect()).collect();
    let bases = krylov::lanczos_block(a, &starts, &[z], &KrylovConfig::default())?;
    let ys = bases.iter().map(|b| b.shifted_solve(z)).collect::<Result<Vec<_>>>()?;
    Ok(indices
        .iter()
        .map(|&(i, j)| {
            let c = cols.binary_search(&j).expect("column present");
            bases[c].component(&ys[c], i)
        })
        .collect())
}

fn resolvent_spectral<T: Field>(w: &Wigner<T>, z: Complex64, indices: &[(usize, usize)]) -> Result<Vec<Complex64>> {
    let s = w.spectral()?;
    let u = &s.vectors;
    let inv: Vec<Complex64> = s.eigenvalues.iter().map(|&l| 1.0 / (z - l)).collect();
    Ok(indices
        .iter()
        .map(|&(i, j)| inv.iter().enumerate().map(|(k, &r)| u[(i, k)].mul_c(r) * u[(j, k)].conj().to_c()).sum())
        .collect())
}

/// `R_ij(z)` for every requested pair, in request order.
pub fn resolvent_entries(x: &WignerSample, req: &ResolventRequest, method: ResolventMethod) -> Result<Vec<Complex64>> {
    let n = x.n();
    if let Some(&(i, j)) = req.indices.iter().find(|&&(i, j)| i >= n || j >= n) {
        return Err(Error::DimensionMismatch(format!("index ({i},{j}) outside dimension {n}")));
    }
    let z = req.z.z;
    check_not_singular(x, z)?;
    with_wigner!(x, w => match method {
        ResolventMethod::Spectral => resolvent_spectral(w, z, &req.indices),
        ResolventMethod::Dense => resolvent_dense(w.matrix().as_ref(), z, &req.indices),
        ResolventMethod::Krylov => resolvent_krylov(w.matrix().as_ref(), z, &req.indices),
    })
}

/// Full resolvent matrix by dense LU.
pub fn resolvent_matrix(x: &WignerSample, z: SpectralPoint) -> Result<Mat<c64>> {
    check_not_singular(x, z.z)?;
    let n = x.n();
    with_wigner!(x, w => {
        let lu = shifted_complex(w.matrix().as_ref(), z.z).partial_piv_lu();
        let inv = lu.inverse();
        debug_assert_eq!(inv.nrows(), n);
        Ok(inv)
    })
}

/// Matrix coordinate with respect to which a resolvent entry is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryCoordinate {
    /// `X_pp`.
    Diagonal(usize),
    /// `X_pq = X_qp` (real case) or `Re X_pq` (Hermitian case), `p ≠ q`.
    Re(usize, usize),
    /// `Im X_pq = −Im X_qp`, Hermitian only.
    Im(usize, usize),
}

/// Closed-form derivative of `R_kl` from the resolvent matrix.
pub fn resolvent_derivative(r: MatRef<'_, c64>, (k, l): (usize, usize), coord: EntryCoordinate) -> Complex64 {
    match coord {
        EntryCoordinate::Diagonal(p) => r[(k, p)] * r[(p, l)],
        EntryCoordinate::Re(p, q) => r[(k, p)] * r[(q, l)] + r[(k, q)] * r[(p, l)],
        EntryCoordinate::Im(p, q) => Complex64::i() * (r[(k, p)] * r[(q, l)] - r[(k, q)] * r[(p, l)]),
    }
}

fn perturbed(x: &WignerSample, coord: EntryCoordinate, h: f64) -> Result<Mat<c64>> {
    let n = x.n();
    let mut m = Mat::<c64>::from_fn(n, n, |i, j| x.entry(i, j));
    match coord {
        EntryCoordinate::Diagonal(p) => m[(p, p)] += h,
        EntryCoordinate::Re(p, q) => {
            m[(p, q)] += h;
            m[(q, p)] += h;
        }
        EntryCoordinate::Im(p, q) => {
            if x.symmetry() != crate::ensembles::Symmetry::Hermitian {
                return Err(Error::InvalidParameter("imaginary coordinates need a Hermitian matrix".into()));
            }
            m[(p, q)] += c64::new(0.0, h);
            m[(q, p)] -= c64::new(0.0, h);
        }
    }
    Ok(m)
}

/// `|∂R_kl/∂coord − central difference|` with step [`FD_STEP`].
pub fn resolvent_derivative_check(
    x: &WignerSample,
    z: SpectralPoint,
    kl: (usize, usize),
    coord: EntryCoordinate,
) -> Result<f64> {
    if z.z.im == 0.0 {
        return Err(Error::InvalidParameter("derivative check needs a non-real z".into()));
    }
    let n = x.n();
    let (p, q) = match coord {
        EntryCoordinate::Diagonal(p) => (p, p),
        EntryCoordinate::Re(p, q) | EntryCoordinate::Im(p, q) => (p, q),
    };
    if kl.0.max(kl.1).max(p).max(q) >= n {
        return Err(Error::DimensionMismatch(format!("indices outside dimension {n}")));
    }
    if !matches!(coord, EntryCoordinate::Diagonal(_)) && p == q {
        return Err(Error::InvalidParameter("off-diagonal coordinate needs p ≠ q".into()));
    }
    let r = resolvent_matrix(x, z)?;
    let analytic = resolvent_derivative(r.as_ref(), kl, coord);
    let entry = |m: Mat<c64>| -> Complex64 {
        let lu = shifted_complex(m.as_ref(), z.z).partial_piv_lu();
        let rhs = Mat::<c64>::from_fn(n, 1, |i, _| if i == kl.1 { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        faer::linalg::solvers::Solve::solve(&lu, rhs.as_ref())[(kl.0, 0)]
    };
    let plus = entry(perturbed(x, coord, FD_STEP)?);
    let minus = entry(perturbed(x, coord, -FD_STEP)?);
    Ok((analytic - (plus - minus) / (2.0 * FD_STEP)).norm())
}

/// The Schur-complement field of the top-left corner at several spectral points.
#[derive(Debug, Clone)]
pub struct SchurField {
    pub points: Vec<SpectralPoint>,
    /// `⟨x⁽ⁱ⁾, R̃(z) x⁽ʲ⁾⟩` per point.
    pub forms: Vec<Mat<c64>>,
    /// `Y_N(z)` per point.
    pub y: Vec<Mat<c64>>,
    /// `R⁽ᵐ⁾(z) = (zI − X⁽ᵐ⁾ − B*R̃B)⁻¹` per point.
    pub corner: Vec<Mat<c64>>,
}

/// Relative residual for the Schur forms. Their error is at most `‖x‖²·tol/dist(z, spectrum)`,
/// far below the O(1) fluctuations of `Y_N` they feed.
pub const SCHUR_KRYLOV_TOL: f64 = 1e-8;

fn schur_forms<T: Field>(
    a: MatRef<'_, T>,
    zs: &[Complex64],
    m: usize,
    method: ResolventMethod,
) -> Result<Vec<Mat<c64>>> {
    let n = a.nrows();
    let lower = a.submatrix(m, m, n - m, n - m);
    let cols: Vec<Vec<T>> = (0..m).map(|j| (m..n).map(|i| a[(i, j)]).collect()).collect();
    match method {
        ResolventMethod::Krylov => {
            let cfg = KrylovConfig { tol: SCHUR_KRYLOV_TOL, ..KrylovConfig::default() };
            let bases = krylov::lanczos_block(lower, &cols, zs, &cfg)?;
            zs.iter()
                .map(|&z| {
                    let ys = bases.iter().map(|b| b.shifted_solve(z)).collect::<Result<Vec<_>>>()?;
                    Ok(Mat::from_fn(m, m, |i, j| bases[j].form(&cols[i], &ys[j])))
                })
                .collect()
        }
        ResolventMethod::Dense => {
            let b = Mat::<c64>::from_fn(n - m, m, |i, j| cols[j][i].to_c());
            zs.iter()
                .map(|&z| {
                    let lu = shifted_complex(lower, z).partial_piv_lu();
                    let sol = faer::linalg::solvers::Solve::solve(&lu, b.as_ref());
                    Ok(b.adjoint() * sol)
                })
                .collect()
        }
        ResolventMethod::Spectral => {
            let evd = lower
                .self_adjoint_eigen(faer::Side::Lower)
                .map_err(|e| Error::Numeric(format!("self-adjoint eigensolver failed: {e:?}")))?;
            let u = evd.U();
            let s = evd.S();
            let b = Mat::<T>::from_fn(n - m, m, |i, j| cols[j][i]);
            let proj = u.adjoint() * b.as_ref();
            Ok(zs
                .iter()
                .map(|&z| {
                    Mat::from_fn(m, m, |i, j| {
                        (0..n - m).map(|k| proj[(k, i)].conj().to_c() * proj[(k, j)].to_c() / (z - s[k].re())).sum()
                    })
                })
                .collect())
        }
    }
}

fn invert_small(t: &Mat<c64>) -> Result<Mat<c64>> {
    let inv = t.partial_piv_lu().inverse();
    if inv.as_ref().norm_max().is_finite() {
        Ok(inv)
    } else {
        Err(Error::NearSingular("Schur complement is singular".into()))
    }
}

/// `Y_N(z)_ij = √N(⟨x⁽ⁱ⁾, R̃(z) x⁽ʲ⁾⟩ − σ²g(z)δ_ij)`, with `R̃` the resolvent of the
/// lower-right `(N − m)` block, at every point in `points`.
pub fn schur_field(
    x: &WignerSample,
    points: &[SpectralPoint],
    m: usize,
    p: &SpectralParams,
    method: ResolventMethod,
) -> Result<SchurField> {
    let n = x.n();
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("corner size {m} must lie in 1..{n}")));
    }
    let gs = points.iter().map(|&z| stieltjes_g(z, p)).collect::<Result<Vec<_>>>()?;
    let zs: Vec<Complex64> = points.iter().map(|z| z.z).collect();
    let forms = with_wigner!(x, w => schur_forms(w.matrix().as_ref(), &zs, m, method))?;
    if forms.iter().any(|f| !f.as_ref().norm_max().is_finite()) {
        return Err(Error::NearSingular("lower-right block resolvent is singular".into()));
    }
    let sqrt_n = (n as f64).sqrt();
    let mut y = Vec::with_capacity(points.len());
    let mut corner = Vec::with_capacity(points.len());
    for ((q, &z), &g) in forms.iter().zip(&zs).zip(&gs) {
        let centre = p.sigma2() * g;
        y.push(Mat::from_fn(m, m, |i, j| sqrt_n * (q[(i, j)] - if i == j { centre } else { Complex64::new(0.0, 0.0) })));
        let t = Mat::<c64>::from_fn(m, m, |i, j| {
            let v = -x.entry(i, j) - q[(i, j)];
            if i == j {
                v + z
            } else {
                v
            }
        });
        corner.push(invert_small(&t)?);
    }
    Ok(SchurField { points: points.to_vec(), forms, y, corner })
}

/// Largest deviation between the Schur-complement corner and the dense resolvent.
pub fn schur_identity_residual(x: &WignerSample, z: SpectralPoint, m: usize, p: &SpectralParams) -> Result<f64> {
    let field = schur_field(x, &[z], m, p, ResolventMethod::Dense)?;
    let r = resolvent_matrix(x, z)?;
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            worst = worst.max((field.corner[0][(i, j)] - r[(i, j)]).norm());
        }
    }
    Ok(worst)
}

/// Spectral norm of `√N(R⁽ᵐ⁾ − gI) − g²(W⁽ᵐ⁾ + Y_N)` at the first point of `field`.
pub fn upsilon_error(x: &WignerSample, field: &SchurField, p: &SpectralParams) -> Result<f64> {
    let z = field.points[0];
    let g = stieltjes_g(z, p)?;
    let m = field.y[0].nrows();
    let sqrt_n = (x.n() as f64).sqrt();
    let diff = Mat::<c64>::from_fn(m, m, |i, j| {
        let lhs = sqrt_n * (field.corner[0][(i, j)] - if i == j { g } else { Complex64::new(0.0, 0.0) });
        let rhs = g * g * (sqrt_n * x.entry(i, j) + field.y[0][(i, j)]);
        lhs - rhs
    });
    let sv = diff
        .singular_values()
        .map_err(|e| Error::Numeric(format!("singular value computation failed: {e:?}")))?;
    Ok(sv.iter().copied().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_wigner, EnsembleSpec, SeedDerivation};
    use crate::functions::Builtin;

    fn goe(n: usize, replica: u64) -> WignerSample {
        sample_wigner(&EnsembleSpec::goe(1.0), n, &SeedDerivation::new(11, replica, "matrixfn")).unwrap()
    }

    fn gue(n: usize, replica: u64) -> WignerSample {
        sample_wigner(&EnsembleSpec::gue(1.0), n, &SeedDerivation::new(12, replica, "matrixfn")).unwrap()
    }

    fn max_dev(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        worst
    }

    #[test]
    fn identity_function_returns_the_block() {
        for x in [goe(30, 0), gue(30, 0)] {
            let fx = apply_function_entries(&x, &Builtin::monomial(1), 5).unwrap();
            let block = Mat::<c64>::from_fn(5, 5, |i, j| x.entry(i, j));
            assert!(max_dev(&fx, &block) <= 1e-12);
            let one = apply_function_entries(&x, &Builtin::monomial(0), 5).unwrap();
            let eye = Mat::<c64>::from_fn(5, 5, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
            assert!(max_dev(&one, &eye) <= 1e-12);
        }
    }

    #[test]
    fn square_matches_dense_product() {
        for x in [goe(3, 1), gue(3, 1)] {
            let full = Mat::<c64>::from_fn(3, 3, |i, j| x.entry(i, j));
            let sq = &full * &full;
            let fx = apply_function_entries(&x, &Builtin::monomial(2), 3).unwrap();
            assert!(max_dev(&fx, &sq) <= 1e-12);
        }
    }

    #[test]
    fn polynomial_path_agrees_with_spectral_path() {
        let coeffs = vec![0.5, -1.0, 0.0, 2.0, 0.25];
        let f = Builtin::Polynomial { coeffs: coeffs.clone() };
        for x in [goe(60, 2), gue(60, 2)] {
            let a = apply_polynomial_entries(&x, &coeffs, 4).unwrap();
            let b = apply_function_entries(&x, &f, 4).unwrap();
            assert!(max_dev(&a, &b) <= 1e-11);
        }
    }

    #[test]
    fn auto_path_certifies_cutoff_window() {
        let x = goe(200, 3);
        let f = Builtin::monomial(3).cut_off(1.0);
        let (auto, path) = apply_function_entries_auto(&x, &f, 3).unwrap();
        assert_eq!(path, FunctionPath::Polynomial);
        let spectral = apply_function_entries(&x, &f, 3).unwrap();
        assert!(max_dev(&auto, &spectral) <= 1e-11);
        // A narrow plateau forces the spectral path.
        let narrow = Builtin::CutOff { inner: Box::new(Builtin::monomial(3)), sigma: 0.5, delta: 0.1 };
        assert_eq!(apply_function_entries_auto(&x, &narrow, 3).unwrap().1, FunctionPath::Spectral);
    }

    #[test]
    fn zero_matrix_resolvent_is_scalar() {
        let x = WignerSample::from_real(Mat::zeros(4, 4)).unwrap();
        let req = ResolventRequest { z: SpectralPoint::real(2.0), indices: vec![(0, 0), (1, 2), (3, 3)] };
        for method in [ResolventMethod::Spectral, ResolventMethod::Dense, ResolventMethod::Krylov] {
            let r = resolvent_entries(&x, &req, method).unwrap();
            assert!((r[0] - 0.5).norm() < 1e-15 && r[1].norm() < 1e-15 && (r[2] - 0.5).norm() < 1e-15);
        }
    }

    #[test]
    fn resolvent_paths_agree() {
        let indices: Vec<(usize, usize)> = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        for x in [goe(120, 4), gue(120, 4)] {
            for z in [SpectralPoint::new(0.3, 0.05), SpectralPoint::real(2.7), SpectralPoint::new(-1.0, 2.0)] {
                let req = ResolventRequest { z, indices: indices.clone() };
                let s = resolvent_entries(&x, &req, ResolventMethod::Spectral).unwrap();
                let d = resolvent_entries(&x, &req, ResolventMethod::Dense).unwrap();
                let k = resolvent_entries(&x, &req, ResolventMethod::Krylov).unwrap();
                for t in 0..s.len() {
                    assert!((s[t] - d[t]).norm() <= 1e-10, "dense {z:?}");
                    assert!((s[t] - k[t]).norm() <= 1e-10, "krylov {z:?}");
                }
            }
        }
    }

    #[test]
    fn eigenvalue_shift_is_rejected() {
        let x = goe(10, 5);
        let lambda = x.eigenvalues().unwrap()[3];
        let req = ResolventRequest { z: SpectralPoint::real(lambda), indices: vec![(0, 0)] };
        assert!(matches!(resolvent_entries(&x, &req, ResolventMethod::Dense), Err(Error::NearSingular(_))));
    }

    #[test]
    fn resolvent_entries_respect_imaginary_bound() {
        let x = goe(50, 6);
        let indices: Vec<(usize, usize)> = (0..50).flat_map(|i| (0..50).map(move |j| (i, j))).collect();
        let r = resolvent_entries(&x, &ResolventRequest { z: SpectralPoint::new(0.0, 3.0), indices }, ResolventMethod::Dense)
            .unwrap();
        assert!(r.iter().all(|v| v.norm() <= 1.0 / 3.0 + 1e-15));
    }

    #[test]
    fn resolvent_identity_holds() {
        let (x1, x2) = (goe(40, 7), goe(40, 8));
        let z = SpectralPoint::new(0.0, 2.0);
        let r1 = resolvent_matrix(&x1, z).unwrap();
        let r2 = resolvent_matrix(&x2, z).unwrap();
        let diff = Mat::<c64>::from_fn(40, 40, |i, j| x1.entry(i, j) - x2.entry(i, j));
        let rhs = &r1 - &r1 * &diff * &r2;
        assert!(max_dev(&r2, &rhs) <= 1e-10);
    }

    #[test]
    fn resolvent_norm_is_inverse_distance() {
        for x in [goe(40, 9), gue(40, 9)] {
            let z = SpectralPoint::new(0.4, 0.2);
            let r = resolvent_matrix(&x, z).unwrap();
            let norm = r.singular_values().unwrap().into_iter().fold(0.0, f64::max);
            let dist = x.eigenvalues().unwrap().iter().map(|&l| (z.z - l).norm()).fold(f64::INFINITY, f64::min);
            assert!((norm - 1.0 / dist).abs() <= 1e-10 * norm);
        }
    }

    #[test]
    fn derivative_formulas_match_finite_differences() {
        let z = SpectralPoint::new(0.2, 0.8);
        let x = goe(20, 10);
        assert!(resolvent_derivative_check(&x, z, (1, 4), EntryCoordinate::Re(2, 7)).unwrap() <= 1e-6);
        assert!(resolvent_derivative_check(&x, z, (2, 7), EntryCoordinate::Re(2, 7)).unwrap() <= 1e-6);
        assert!(resolvent_derivative_check(&x, z, (3, 3), EntryCoordinate::Diagonal(5)).unwrap() <= 1e-6);
        let h = gue(20, 10);
        assert!(resolvent_derivative_check(&h, z, (1, 4), EntryCoordinate::Re(2, 7)).unwrap() <= 1e-6);
        assert!(resolvent_derivative_check(&h, z, (1, 4), EntryCoordinate::Im(2, 7)).unwrap() <= 1e-6);
        assert!(resolvent_derivative_check(&h, z, (7, 2), EntryCoordinate::Im(2, 7)).unwrap() <= 1e-6);
        assert!(resolvent_derivative_check(&h, z, (0, 0), EntryCoordinate::Diagonal(0)).unwrap() <= 1e-6);
        assert!(resolvent_derivative_check(&x, z, (0, 0), EntryCoordinate::Im(0, 1)).is_err());
    }

    #[test]
    fn schur_corner_reproduces_resolvent() {
        let p = SpectralParams::unit();
        for x in [goe(200, 11), gue(200, 11)] {
            for z in [SpectralPoint::real(3.0), SpectralPoint::new(0.5, 1.0)] {
                assert!(schur_identity_residual(&x, z, 3, &p).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn schur_methods_agree() {
        let p = SpectralParams::unit();
        let pts = [SpectralPoint::real(2.5), SpectralPoint::new(0.0, 2.0)];
        for x in [goe(150, 12), gue(150, 12)] {
            let d = schur_field(&x, &pts, 2, &p, ResolventMethod::Dense).unwrap();
            let k = schur_field(&x, &pts, 2, &p, ResolventMethod::Krylov).unwrap();
            let s = schur_field(&x, &pts, 2, &p, ResolventMethod::Spectral).unwrap();
            for t in 0..pts.len() {
                // Y is √N times a form whose error is at most ‖x‖²·tol/dist(z, spectrum).
                assert!(max_dev(&d.y[t], &k.y[t]) <= 1e-7);
                assert!(max_dev(&d.y[t], &s.y[t]) <= 1e-9);
            }
        }
    }

    #[test]
    fn empty_quadratic_form_gives_centring_only() {
        let p = SpectralParams::unit();
        let n = 9;
        let m = Mat::<f64>::from_fn(n, n, |i, j| if i == 0 || j == 0 { 0.0 } else { ((i * j) as f64).sin() * (i == j) as u8 as f64 });
        let x = WignerSample::from_real(m).unwrap();
        let z = SpectralPoint::new(0.3, 1.5);
        let field = schur_field(&x, &[z], 1, &p, ResolventMethod::Dense).unwrap();
        let g = stieltjes_g(z, &p).unwrap();
        assert!((field.y[0][(0, 0)] + 3.0 * g).norm() < 1e-14);
    }

    #[test]
    fn upsilon_matches_first_order_expansion() {
        let p = SpectralParams::unit();
        let z = SpectralPoint::real(3.0);
        let x = goe(800, 13);
        let field = schur_field(&x, &[z], 2, &p, ResolventMethod::Krylov).unwrap();
        // The remainder is O(N^{-1/2}) while the field itself is O(1).
        let err = upsilon_error(&x, &field, &p).unwrap();
        let g2 = stieltjes_g(z, &p).unwrap().norm_sqr();
        assert!(err < 0.5 * g2, "remainder {err}");
    }
}
