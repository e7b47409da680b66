//! Entry marginals, Wigner samplers, and i.i.d. vector samplers.

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::sync::OnceLock;

use crate::quadrature;
use crate::scalar::Field;
use crate::semicircle::SpectralParams;
use crate::{Error, Result};

/// Central moments `!k` (derangement numbers) of a unit-rate exponential.
fn derangement(k: u32) -> f64 {
    let (mut a, mut b) = (1.0f64, 0.0f64); // !0, !1
    if k == 0 {
        return a;
    }
    for j in 2..=k {
        let c = (j as f64 - 1.0) * (a + b);
        a = b;
        b = c;
    }
    b
}

fn odd_double_factorial(k: u32) -> f64 {
    (1..=k).step_by(2).fold(1.0, |acc, i| acc * i as f64)
}

/// Centered entry distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Gaussian { variance: f64 },
    /// `±σ` with equal probability.
    Rademacher { variance: f64 },
    /// Uniform on `[−√(3v), √(3v)]`.
    Uniform { variance: f64 },
    /// `σ(E − 1)` with `E` unit exponential; skewed, all moments finite.
    ShiftedExponential { variance: f64 },
    /// `{−a, 0, a}` with `P(±a) = p/2`, `p = v²/(κ₄ + 3v²)`; requires `κ₄ ≥ −2v²`.
    ThreePoint { variance: f64, kappa4: f64 },
}

/// How expectations over a marginal are computed exactly (or to quadrature accuracy).
#[derive(Debug, Clone, PartialEq)]
pub enum ExpectationRule {
    Atoms(Vec<(f64, f64)>),
    Gaussian { sd: f64 },
    /// Nodes and weights of a quadrature rule for a continuous law.
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

impl Marginal {
    pub fn standard_gaussian() -> Self {
        Marginal::Gaussian { variance: 1.0 }
    }

    pub fn rademacher() -> Self {
        Marginal::Rademacher { variance: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Marginal::Gaussian { .. } => "gaussian",
            Marginal::Rademacher { .. } => "rademacher",
            Marginal::Uniform { .. } => "uniform",
            Marginal::ShiftedExponential { .. } => "shifted_exponential",
            Marginal::ThreePoint { .. } => "three_point",
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Gaussian { variance }
            | Marginal::Rademacher { variance }
            | Marginal::Uniform { variance }
            | Marginal::ShiftedExponential { variance }
            | Marginal::ThreePoint { variance, .. } => variance,
        }
    }

    /// Same law rescaled to variance `v`.
    pub fn with_variance(&self, v: f64) -> Self {
        match *self {
            Marginal::Gaussian { .. } => Marginal::Gaussian { variance: v },
            Marginal::Rademacher { .. } => Marginal::Rademacher { variance: v },
            Marginal::Uniform { .. } => Marginal::Uniform { variance: v },
            Marginal::ShiftedExponential { .. } => Marginal::ShiftedExponential { variance: v },
            Marginal::ThreePoint { variance, kappa4 } => {
                let r = v / variance;
                Marginal::ThreePoint { variance: v, kappa4: kappa4 * r * r }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.variance();
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{} variance must be positive, got {v}", self.name())));
        }
        if let Marginal::ThreePoint { kappa4, .. } = *self {
            let floor = -2.0 * v * v;
            if !kappa4.is_finite() || kappa4 < floor * (1.0 + 1e-12) {
                return Err(Error::InvalidCumulant { kappa4, floor });
            }
        }
        Ok(())
    }

    fn three_point(variance: f64, kappa4: f64) -> (f64, f64) {
        let p = (variance * variance / (kappa4 + 3.0 * variance * variance)).min(1.0);
        (p, (variance / p).sqrt())
    }

    fn uniform_half_width(variance: f64) -> f64 {
        (3.0 * variance).sqrt()
    }

    /// Raw moment `E ξ^k`.
    pub fn moment(&self, k: u32) -> f64 {
        let v = self.variance();
        let s = v.sqrt();
        if k == 0 {
            return 1.0;
        }
        match *self {
            Marginal::ShiftedExponential { .. } => derangement(k) * s.powi(k as i32),
            _ if k % 2 == 1 => 0.0,
            Marginal::Gaussian { .. } => odd_double_factorial(k - 1) * s.powi(k as i32),
            Marginal::Rademacher { .. } => s.powi(k as i32),
            Marginal::Uniform { .. } => Self::uniform_half_width(v).powi(k as i32) / (k as f64 + 1.0),
            Marginal::ThreePoint { kappa4, .. } => {
                let (p, a) = Self::three_point(v, kappa4);
                p * a.powi(k as i32)
            }
        }
    }

    /// Absolute moment `E|ξ|^k`.
    pub fn abs_moment(&self, k: u32) -> f64 {
        let s = self.variance().sqrt();
        match *self {
            Marginal::Gaussian { .. } => {
                let kf = k as f64;
                s.powi(k as i32) * 2f64.powf(kf / 2.0) * statrs::function::gamma::gamma((kf + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt()
            }
            Marginal::ShiftedExponential { .. } => {
                // ∫₀¹ (1−x)^k e^{−x} dx + k!/e
                let rule = quadrature::gauss_legendre(32).expect("fixed rule").mapped(0.0, 1.0);
                let head = rule.integrate(|x| (1.0 - x).powi(k as i32) * (-x).exp());
                let tail = (1..=k).fold(1.0, |acc, i| acc * i as f64) / std::f64::consts::E;
                s.powi(k as i32) * (head + tail)
            }
            _ if k % 2 == 0 => self.moment(k),
            Marginal::Rademacher { .. } => s.powi(k as i32),
            Marginal::Uniform { variance } => {
                Self::uniform_half_width(variance).powi(k as i32) / (k as f64 + 1.0)
            }
            Marginal::ThreePoint { variance, kappa4 } => {
                let (p, a) = Self::three_point(variance, kappa4);
                p * a.powi(k as i32)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// Cumulant `κ_k` for `k ≤ 4` (mean zero).
    pub fn cumulant(&self, k: u32) -> Result<f64> {
        match k {
            1 => Ok(0.0),
            2 => Ok(self.moment(2)),
            3 => Ok(self.moment(3)),
            4 => Ok(self.moment(4) - 3.0 * self.moment(2).powi(2)),
            _ => Err(Error::InvalidParameter(format!("cumulant order {k} not supported"))),
        }
    }

    /// `(κ₂, κ₃, κ₄)`.
    pub fn cumulants(&self) -> (f64, f64, f64) {
        let m2 = self.moment(2);
        (m2, self.moment(3), self.moment(4) - 3.0 * m2 * m2)
    }

    /// Support interval (possibly unbounded).
    pub fn support(&self) -> (f64, f64) {
        let v = self.variance();
        match *self {
            Marginal::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Marginal::Rademacher { .. } => (-v.sqrt(), v.sqrt()),
            Marginal::Uniform { .. } => {
                let a = Self::uniform_half_width(v);
                (-a, a)
            }
            Marginal::ShiftedExponential { .. } => (-v.sqrt(), f64::INFINITY),
            Marginal::ThreePoint { kappa4, .. } => {
                let (_, a) = Self::three_point(v, kappa4);
                (-a, a)
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, Marginal::ShiftedExponential { .. })
    }

    /// Distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        if let Some(atoms) = self.atoms() {
            return atoms.iter().filter(|(a, _)| *a <= x).map(|(_, p)| p).sum();
        }
        let v = self.variance();
        match *self {
            Marginal::Gaussian { .. } => crate::normal::cdf(x / v.sqrt()),
            Marginal::Uniform { .. } => {
                let a = Self::uniform_half_width(v);
                ((x + a) / (2.0 * a)).clamp(0.0, 1.0)
            }
            Marginal::ShiftedExponential { .. } => {
                let e = x / v.sqrt() + 1.0;
                if e <= 0.0 {
                    0.0
                } else {
                    -(-e).exp_m1()
                }
            }
            _ => unreachable!("discrete marginals enumerate atoms"),
        }
    }

    /// Support points and probabilities of the discrete marginals.
    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let v = self.variance();
        match *self {
            Marginal::Rademacher { .. } => Some(vec![(-v.sqrt(), 0.5), (v.sqrt(), 0.5)]),
            Marginal::ThreePoint { kappa4, .. } => {
                let (p, a) = Self::three_point(v, kappa4);
                let mut atoms = vec![(-a, p / 2.0), (a, p / 2.0)];
                if p < 1.0 {
                    atoms.insert(1, (0.0, 1.0 - p));
                }
                Some(atoms)
            }
            _ => None,
        }
    }

    /// Rule for computing `E φ(ξ)` for smooth `φ`.
    pub fn expectation_rule(&self) -> ExpectationRule {
        // Unit-scale rules, built once: Legendre on [−1, 1] and e^{−E} on [0, 60].
        static UNIFORM: OnceLock<quadrature::GaussRule> = OnceLock::new();
        static EXPONENTIAL: OnceLock<quadrature::GaussRule> = OnceLock::new();
        if let Some(atoms) = self.atoms() {
            return ExpectationRule::Atoms(atoms);
        }
        let s = self.variance().sqrt();
        match *self {
            Marginal::Gaussian { .. } => ExpectationRule::Gaussian { sd: s },
            Marginal::Uniform { .. } => {
                let rule = UNIFORM.get_or_init(|| {
                    let r = quadrature::composite_legendre(-1.0, 1.0, 64, 8).expect("fixed rule");
                    quadrature::GaussRule { weights: r.weights.iter().map(|w| 0.5 * w).collect(), nodes: r.nodes }
                });
                let a = Self::uniform_half_width(s * s);
                ExpectationRule::Quadrature { nodes: rule.nodes.iter().map(|x| a * x).collect(), weights: rule.weights.clone() }
            }
            Marginal::ShiftedExponential { .. } => {
                let rule = EXPONENTIAL.get_or_init(|| {
                    let r = quadrature::composite_legendre(0.0, 60.0, 480, 8).expect("fixed rule");
                    quadrature::GaussRule {
                        weights: r.nodes.iter().zip(&r.weights).map(|(&e, &w)| w * (-e).exp()).collect(),
                        nodes: r.nodes.iter().map(|e| e - 1.0).collect(),
                    }
                });
                ExpectationRule::Quadrature { nodes: rule.nodes.iter().map(|x| s * x).collect(), weights: rule.weights.clone() }
            }
            Marginal::Rademacher { .. } | Marginal::ThreePoint { .. } => unreachable!("handled as atoms"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = self.variance();
        match *self {
            Marginal::Gaussian { .. } => v.sqrt() * rng.sample::<f64, _>(StandardNormal),
            Marginal::Rademacher { .. } => {
                if rng.random_bool(0.5) {
                    v.sqrt()
                } else {
                    -v.sqrt()
                }
            }
            Marginal::Uniform { .. } => {
                let a = Self::uniform_half_width(v);
                a * (2.0 * rng.random::<f64>() - 1.0)
            }
            Marginal::ShiftedExponential { .. } => v.sqrt() * (rng.sample::<f64, _>(Exp1) - 1.0),
            Marginal::ThreePoint { kappa4, .. } => {
                let (p, a) = Self::three_point(v, kappa4);
                let u: f64 = rng.random();
                if u < p / 2.0 {
                    -a
                } else if u < p {
                    a
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    RealSymmetric,
    Hermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryClass {
    Diag,
    Offdiag,
}

/// Symmetry class plus entry laws.
///
/// `offdiag` is the law of `W_jk` (real case) or of each of `√2 Re W_jk`, `√2 Im W_jk`
/// (Hermitian case); `diag` is the law of `W_ii` itself. For GOE this means
/// `diag` has variance `2σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub symmetry: Symmetry,
    pub offdiag: Marginal,
    pub diag: Marginal,
}

impl EnsembleSpec {
    pub fn new(symmetry: Symmetry, offdiag: Marginal, diag: Marginal) -> Result<Self> {
        let s = Self { symmetry, offdiag, diag };
        s.validate()?;
        Ok(s)
    }

    pub fn goe(sigma: f64) -> Self {
        let v = sigma * sigma;
        Self {
            symmetry: Symmetry::RealSymmetric,
            offdiag: Marginal::Gaussian { variance: v },
            diag: Marginal::Gaussian { variance: 2.0 * v },
        }
    }

    pub fn gue(sigma: f64) -> Self {
        let v = sigma * sigma;
        Self {
            symmetry: Symmetry::Hermitian,
            offdiag: Marginal::Gaussian { variance: v },
            diag: Marginal::Gaussian { variance: v },
        }
    }

    /// Real symmetric ensemble with the same law on and off the diagonal.
    pub fn real_iid(m: Marginal) -> Self {
        Self { symmetry: Symmetry::RealSymmetric, offdiag: m, diag: m }
    }

    pub fn validate(&self) -> Result<()> {
        self.offdiag.validate()?;
        self.diag.validate()
    }

    pub fn params(&self) -> SpectralParams {
        SpectralParams::new(self.offdiag.variance().sqrt()).expect("validated variance")
    }

    pub fn sigma(&self) -> f64 {
        self.offdiag.variance().sqrt()
    }

    /// Effective fourth cumulant: `m₄ − 3σ⁴` (real) or `E|W₁₂|⁴ − 2σ⁴ = (m₄ − 3σ⁴)/2` (Hermitian).
    pub fn kappa4(&self) -> f64 {
        let k = self.offdiag.cumulants().2;
        match self.symmetry {
            Symmetry::RealSymmetric => k,
            Symmetry::Hermitian => 0.5 * k,
        }
    }

    /// `E|W_ii|²`, i.e. σ₁².
    pub fn diag_variance(&self) -> f64 {
        self.diag.variance()
    }

    pub fn is_hermitian(&self) -> bool {
        self.symmetry == Symmetry::Hermitian
    }
}

/// Splittable seed scheme: each `(master, replica, label)` triple owns an independent stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedDerivation {
    pub master_seed: u64,
    pub replica: u64,
    pub label: String,
}

impl SeedDerivation {
    pub fn new(master_seed: u64, replica: u64, label: impl Into<String>) -> Self {
        Self { master_seed, replica, label: label.into() }
    }

    pub fn child(&self, label: &str) -> Self {
        Self { master_seed: self.master_seed, replica: self.replica, label: format!("{}/{label}", self.label) }
    }

    pub fn seed_bytes(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.master_seed.to_le_bytes());
        h.update(self.replica.to_le_bytes());
        h.update(self.label.as_bytes());
        h.finalize().into()
    }

    /// Stable 64-bit digest of the triple.
    pub fn seed64(&self) -> u64 {
        let b = self.seed_bytes();
        u64::from_le_bytes(b[..8].try_into().expect("32 bytes"))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed_bytes())
    }
}

/// Eigen-decomposition `X = U diag(λ) U*`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectral<T> {
    pub eigenvalues: Vec<f64>,
    pub vectors: Mat<T>,
}

fn eigen<T: Field>(m: &Mat<T>) -> Result<Spectral<T>> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("self-adjoint eigensolver failed: {e:?}")))?;
    let s = evd.S();
    let eigenvalues = (0..m.nrows()).map(|k| s[k].re()).collect();
    Ok(Spectral { eigenvalues, vectors: evd.U().to_owned() })
}

fn eigenvalues<T: Field>(m: &Mat<T>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("self-adjoint eigensolver failed: {e:?}")))
}

/// Normalized Wigner matrix `X = W/√n` of one scalar type.
#[derive(Debug)]
pub struct Wigner<T: Field> {
    matrix: Mat<T>,
    spectral: OnceLock<std::result::Result<Spectral<T>, Error>>,
    eigenvalues: OnceLock<std::result::Result<Vec<f64>, Error>>,
}

impl<T: Field> Wigner<T> {
    pub fn from_matrix(matrix: Mat<T>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, matrix.ncols())));
        }
        for j in 0..n {
            for i in j..n {
                if matrix[(i, j)] != matrix[(j, i)].conj() {
                    return Err(Error::Contract(format!("matrix is not self-adjoint at ({i},{j})")));
                }
            }
        }
        Ok(Self { matrix, spectral: OnceLock::new(), eigenvalues: OnceLock::new() })
    }

    fn self_adjoint_by_construction(matrix: Mat<T>) -> Self {
        debug_assert!(matrix.nrows() == matrix.ncols());
        Self { matrix, spectral: OnceLock::new(), eigenvalues: OnceLock::new() }
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Cached full decomposition, computed on first use.
    pub fn spectral(&self) -> Result<&Spectral<T>> {
        self.spectral.get_or_init(|| eigen(&self.matrix)).as_ref().map_err(Clone::clone)
    }

    /// Cached eigenvalues; reuses the full decomposition if it already exists.
    pub fn eigenvalues(&self) -> Result<&[f64]> {
        if let Some(Ok(s)) = self.spectral.get() {
            return Ok(&s.eigenvalues);
        }
        self.eigenvalues
            .get_or_init(|| eigenvalues(&self.matrix))
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(Clone::clone)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        let ev = self.eigenvalues()?;
        Ok(ev.first().map_or(0.0, |a| a.abs()).max(ev.last().map_or(0.0, |b| b.abs())))
    }

    /// Whether the spectrum certifiably lies in `(−r, r)`: read off cached eigenvalues,
    /// otherwise decided by Cholesky factorizations of `rI ∓ X`. A factorization that
    /// breaks down counts as a failure, so `false` may be conservative.
    pub fn spectrum_within(&self, r: f64) -> bool {
        if let Some(Ok(s)) = self.spectral.get() {
            return s.eigenvalues.iter().all(|l| l.abs() < r);
        }
        if let Some(Ok(ev)) = self.eigenvalues.get() {
            return ev.iter().all(|l| l.abs() < r);
        }
        let n = self.n();
        [1.0, -1.0].into_iter().all(|sign| {
            let shifted = Mat::<T>::from_fn(n, n, |i, j| {
                let v = self.matrix[(i, j)].scale(-sign);
                if i == j {
                    v + T::from_re(r)
                } else {
                    v
                }
            });
            shifted.llt(Side::Lower).is_ok()
        })
    }

    pub fn is_exactly_self_adjoint(&self) -> bool {
        let n = self.n();
        (0..n).all(|j| (j..n).all(|i| self.matrix[(i, j)] == self.matrix[(j, i)].conj()))
    }
}

/// A sampled real symmetric or Hermitian Wigner matrix.
#[derive(Debug)]
pub enum WignerSample {
    Real(Wigner<f64>),
    Hermitian(Wigner<c64>),
}

impl WignerSample {
    pub fn n(&self) -> usize {
        match self {
            WignerSample::Real(w) => w.n(),
            WignerSample::Hermitian(w) => w.n(),
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        match self {
            WignerSample::Real(_) => Symmetry::RealSymmetric,
            WignerSample::Hermitian(_) => Symmetry::Hermitian,
        }
    }

    pub fn eigenvalues(&self) -> Result<&[f64]> {
        match self {
            WignerSample::Real(w) => w.eigenvalues(),
            WignerSample::Hermitian(w) => w.eigenvalues(),
        }
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        match self {
            WignerSample::Real(w) => w.spectral_radius(),
            WignerSample::Hermitian(w) => w.spectral_radius(),
        }
    }

    pub fn spectrum_within(&self, r: f64) -> bool {
        match self {
            WignerSample::Real(w) => w.spectrum_within(r),
            WignerSample::Hermitian(w) => w.spectrum_within(r),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            WignerSample::Real(w) => Complex64::new(w.matrix()[(i, j)], 0.0),
            WignerSample::Hermitian(w) => w.matrix()[(i, j)],
        }
    }

    pub fn is_exactly_self_adjoint(&self) -> bool {
        match self {
            WignerSample::Real(w) => w.is_exactly_self_adjoint(),
            WignerSample::Hermitian(w) => w.is_exactly_self_adjoint(),
        }
    }

    pub fn from_real(m: Mat<f64>) -> Result<Self> {
        Ok(WignerSample::Real(Wigner::from_matrix(m)?))
    }

    pub fn from_hermitian(m: Mat<c64>) -> Result<Self> {
        Ok(WignerSample::Hermitian(Wigner::from_matrix(m)?))
    }
}

/// Samples `X = W/√n`; entries are drawn column by column over the lower triangle.
pub fn sample_wigner(spec: &EnsembleSpec, n: usize, seed: &SeedDerivation) -> Result<WignerSample> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = seed.rng();
    let scale = 1.0 / (n as f64).sqrt();
    // Columns of the lower triangle are contiguous; the upper triangle is mirrored afterwards.
    match spec.symmetry {
        Symmetry::RealSymmetric => {
            let mut m = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                let col = m.col_as_slice_mut(j);
                col[j] = scale * spec.diag.sample(&mut rng);
                for x in &mut col[j + 1..] {
                    *x = scale * spec.offdiag.sample(&mut rng);
                }
            }
            mirror_lower(&mut m);
            Ok(WignerSample::Real(Wigner::self_adjoint_by_construction(m)))
        }
        Symmetry::Hermitian => {
            let mut m = Mat::<c64>::zeros(n, n);
            let s = scale * std::f64::consts::FRAC_1_SQRT_2;
            for j in 0..n {
                let col = m.col_as_slice_mut(j);
                col[j] = c64::new(scale * spec.diag.sample(&mut rng), 0.0);
                for x in &mut col[j + 1..] {
                    let re = spec.offdiag.sample(&mut rng);
                    let im = spec.offdiag.sample(&mut rng);
                    *x = c64::new(s * re, s * im);
                }
            }
            mirror_lower(&mut m);
            Ok(WignerSample::Hermitian(Wigner::self_adjoint_by_construction(m)))
        }
    }
}

const MIRROR_TILE: usize = 64;

/// Writes the conjugate of the strict lower triangle into the upper one, tile by tile.
fn mirror_lower<T: Field>(m: &mut Mat<T>) {
    let n = m.nrows();
    for jb in (0..n).step_by(MIRROR_TILE) {
        for ib in (jb..n).step_by(MIRROR_TILE) {
            for j in jb..(jb + MIRROR_TILE).min(n) {
                for i in ib.max(j + 1)..(ib + MIRROR_TILE).min(n) {
                    let v = m[(i, j)].conj();
                    m[(j, i)] = v;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IidVector {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl IidVector {
    pub fn len(&self) -> usize {
        match self {
            IidVector::Real(v) => v.len(),
            IidVector::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fills `out` with i.i.d. unit-variance coordinates; complex coordinates have
/// independent real and imaginary parts of variance 1/2 each.
pub fn fill_iid<R: Rng + ?Sized>(d: &Marginal, rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = d.sample(rng);
    }
}

pub fn sample_iid_vector(d: &Marginal, n: usize, seed: &SeedDerivation, field: FieldKind) -> Result<IidVector> {
    d.validate()?;
    if (d.variance() - 1.0).abs() > 1e-12 {
        return Err(Error::Contract(format!("coordinates need unit variance, got {}", d.variance())));
    }
    let mut rng = seed.rng();
    Ok(match field {
        FieldKind::Real => {
            let mut v = vec![0.0; n];
            fill_iid(d, &mut rng, &mut v);
            IidVector::Real(v)
        }
        FieldKind::Complex => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            IidVector::Complex(
                (0..n)
                    .map(|_| {
                        let re = d.sample(&mut rng);
                        let im = d.sample(&mut rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect(),
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn builtins() -> Vec<Marginal> {
        vec![
            Marginal::standard_gaussian(),
            Marginal::rademacher(),
            Marginal::Uniform { variance: 1.0 },
            Marginal::ShiftedExponential { variance: 1.0 },
            Marginal::ThreePoint { variance: 1.0, kappa4: 1.5 },
            Marginal::Gaussian { variance: 2.5 },
            Marginal::ThreePoint { variance: 0.7, kappa4: -0.98 },
        ]
    }

    #[test]
    fn cumulant_examples() {
        assert_eq!(Marginal::standard_gaussian().cumulants(), (1.0, 0.0, 0.0));
        assert_eq!(Marginal::rademacher().cumulants(), (1.0, 0.0, -2.0));
        let (k2, k3, k4) = Marginal::Uniform { variance: 1.0 }.cumulants();
        assert_relative_eq!(k2, 1.0, epsilon = 1e-15);
        assert_eq!(k3, 0.0);
        assert_relative_eq!(k4, -1.2, epsilon = 1e-14);
        let e = Marginal::ShiftedExponential { variance: 1.0 };
        assert_eq!(e.cumulants(), (1.0, 2.0, 6.0));
        let t = Marginal::ThreePoint { variance: 2.0, kappa4: 5.0 };
        assert_relative_eq!(t.cumulant(4).unwrap(), 5.0, epsilon = 1e-12);
        assert!(Marginal::ThreePoint { variance: 1.0, kappa4: -2.5 }.validate().is_err());
        assert!(Marginal::ThreePoint { variance: 1.0, kappa4: -2.0 }.validate().is_ok());
    }

    #[test]
    fn moments_match_expectation_rules() {
        for m in builtins() {
            let rule = m.expectation_rule();
            for k in 0..=6u32 {
                let got = match &rule {
                    ExpectationRule::Atoms(a) => a.iter().map(|(x, p)| p * x.powi(k as i32)).sum(),
                    ExpectationRule::Quadrature { nodes, weights } => {
                        nodes.iter().zip(weights).map(|(x, w)| w * x.powi(k as i32)).sum()
                    }
                    ExpectationRule::Gaussian { sd } => {
                        let gh = quadrature::gauss_hermite_prob(20).unwrap();
                        gh.integrate(|x| (sd * x).powi(k as i32))
                    }
                };
                let exact = m.moment(k);
                assert!((got - exact).abs() <= 1e-10 * exact.abs().max(1.0), "{} k={k}: {got} vs {exact}", m.name());
                let abs_exact = m.abs_moment(k);
                let abs_got: f64 = match &rule {
                    ExpectationRule::Atoms(a) => a.iter().map(|(x, p)| p * x.abs().powi(k as i32)).sum(),
                    ExpectationRule::Quadrature { nodes, weights } => {
                        nodes.iter().zip(weights).map(|(x, w)| w * x.abs().powi(k as i32)).sum()
                    }
                    ExpectationRule::Gaussian { .. } => abs_exact,
                };
                // kink of |x|^k at 0 limits the composite rule accuracy
                assert!((abs_got - abs_exact).abs() <= 1e-6 * abs_exact.max(1.0), "{} |k|={k}", m.name());
            }
        }
        let g = Marginal::standard_gaussian();
        assert_relative_eq!(g.abs_moment(1), (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(g.abs_moment(3), 2.0 * (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn cdf_is_monotone_and_normalized() {
        for m in builtins() {
            let (lo, hi) = m.support();
            let lo = lo.max(-10.0) - 1.0;
            let hi = hi.min(30.0) + 1.0;
            assert!(m.cdf(lo) <= 1e-9, "{}", m.name());
            assert!((m.cdf(hi) - 1.0).abs() <= 1e-6, "{}", m.name());
            let mut prev = 0.0;
            for k in 0..=200 {
                let c = m.cdf(lo + (hi - lo) * k as f64 / 200.0);
                assert!(c >= prev - 1e-15);
                prev = c;
            }
        }
        assert_eq!(Marginal::rademacher().cdf(0.5), 0.5);
    }

    #[test]
    fn empirical_moments_within_five_standard_errors() {
        for (idx, m) in builtins().into_iter().enumerate() {
            let mut rng = SeedDerivation::new(7, idx as u64, "moments").rng();
            let n = 1_000_000;
            let (mut s1, mut s4) = (0.0, 0.0);
            for _ in 0..n {
                let x = m.sample(&mut rng);
                s1 += x;
                s4 += x.powi(4);
            }
            let nf = n as f64;
            let se1 = (m.moment(2) / nf).sqrt();
            assert!((s1 / nf).abs() <= 5.0 * se1, "{} mean", m.name());
            let se4 = ((m.moment(8) - m.moment(4).powi(2)).max(0.0) / nf).sqrt();
            assert!((s4 / nf - m.moment(4)).abs() <= 5.0 * se4 + 1e-9, "{} m4", m.name());
        }
    }

    #[test]
    fn seed_determinism_and_independence() {
        let spec = EnsembleSpec::goe(1.0);
        let s = SeedDerivation::new(42, 3, "wigner");
        let a = sample_wigner(&spec, 30, &s).unwrap();
        let b = sample_wigner(&spec, 30, &s).unwrap();
        let c = sample_wigner(&spec, 30, &SeedDerivation::new(42, 4, "wigner")).unwrap();
        match (&a, &b, &c) {
            (WignerSample::Real(a), WignerSample::Real(b), WignerSample::Real(c)) => {
                assert!(a.matrix() == b.matrix());
                assert!(a.matrix() != c.matrix());
            }
            _ => panic!("expected real samples"),
        }
        assert_ne!(s.seed64(), s.child("x").seed64());
    }

    #[test]
    fn sampler_shapes() {
        let s = SeedDerivation::new(1, 0, "t");
        let a = sample_wigner(&EnsembleSpec::goe(1.0), 2, &s).unwrap();
        assert!(a.is_exactly_self_adjoint());
        let n = 1000;
        let r = sample_wigner(&EnsembleSpec::real_iid(Marginal::rademacher()), n, &s).unwrap();
        let t = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert_eq!(r.entry(i, j).re.abs(), t);
                }
            }
        }
        let h = sample_wigner(&EnsembleSpec::gue(1.0), 500, &s).unwrap();
        assert!(h.is_exactly_self_adjoint());
        for i in 0..500 {
            assert_eq!(h.entry(i, i).im, 0.0);
        }
        assert!(sample_wigner(&EnsembleSpec::goe(1.0), 0, &s).is_err());
    }

    #[test]
    fn spectral_radius_sanity() {
        let spec = EnsembleSpec::real_iid(Marginal::Uniform { variance: 1.0 });
        for r in 0..3 {
            let x = sample_wigner(&spec, 500, &SeedDerivation::new(5, r, "radius")).unwrap();
            assert!(x.spectral_radius().unwrap() <= 3.0);
        }
        let h = sample_wigner(&EnsembleSpec::gue(1.0), 500, &SeedDerivation::new(5, 0, "radius")).unwrap();
        assert!(h.spectral_radius().unwrap() <= 3.0);
    }

    #[test]
    fn cholesky_certificate_agrees_with_eigenvalues() {
        for (spec, r) in [(EnsembleSpec::goe(1.0), 0), (EnsembleSpec::gue(1.0), 1)] {
            let seed = SeedDerivation::new(6, r, "certify");
            let fresh = sample_wigner(&spec, 200, &seed).unwrap();
            let radius = sample_wigner(&spec, 200, &seed).unwrap().spectral_radius().unwrap();
            for t in [0.9 * radius, 0.999 * radius, 1.001 * radius, 1.5 * radius] {
                assert_eq!(fresh.spectrum_within(t), radius < t, "t = {t}, radius = {radius}");
            }
            // The cached path gives the same answers.
            fresh.eigenvalues().unwrap();
            assert!(fresh.spectrum_within(1.001 * radius) && !fresh.spectrum_within(radius));
        }
    }

    #[test]
    fn cached_decomposition_reconstructs_matrix() {
        let x = sample_wigner(&EnsembleSpec::gue(1.0), 40, &SeedDerivation::new(9, 0, "evd")).unwrap();
        let WignerSample::Hermitian(w) = &x else { panic!() };
        let s = w.spectral().unwrap();
        let u = &s.vectors;
        let d = Mat::<c64>::from_fn(40, 40, |i, j| if i == j { c64::new(s.eigenvalues[i], 0.0) } else { c64::new(0.0, 0.0) });
        let rec = u * &d * u.adjoint();
        let err = (&rec - w.matrix()).norm_max();
        assert!(err <= 1e-12);
        assert_eq!(w.eigenvalues().unwrap(), s.eigenvalues.as_slice());
    }

    #[test]
    fn kappa4_per_symmetry_class() {
        let r = EnsembleSpec::real_iid(Marginal::rademacher());
        assert_eq!(r.kappa4(), -2.0);
        let h = EnsembleSpec { symmetry: Symmetry::Hermitian, ..r };
        assert_eq!(h.kappa4(), -1.0);
        // E|W|^4 − 2σ⁴ for W = (a + ib)/√2 with a, b = ±1: |W|⁴ = 1
        assert_eq!(1.0 - 2.0, h.kappa4());
        assert_eq!(EnsembleSpec::goe(1.0).diag_variance(), 2.0);
    }

    #[test]
    fn iid_vectors() {
        let s = SeedDerivation::new(3, 0, "vec");
        let IidVector::Real(v) = sample_iid_vector(&Marginal::standard_gaussian(), 1_000_000, &s, FieldKind::Real).unwrap() else {
            panic!()
        };
        let var = v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        assert!((var - 1.0).abs() <= 5.0 * (2.0f64 / 1e6).sqrt());
        let IidVector::Real(r) = sample_iid_vector(&Marginal::rademacher(), 4, &s, FieldKind::Real).unwrap() else {
            panic!()
        };
        assert!(r.iter().all(|x| x.abs() == 1.0));
        let IidVector::Complex(c) =
            sample_iid_vector(&Marginal::standard_gaussian(), 100_000, &s, FieldKind::Complex).unwrap()
        else {
            panic!()
        };
        let m = c.iter().map(|x| x.norm_sqr()).sum::<f64>() / c.len() as f64;
        assert!((m - 1.0).abs() <= 5.0 * (1.0f64 / 1e5).sqrt());
        assert!(matches!(
            sample_iid_vector(&Marginal::Gaussian { variance: 2.0 }, 4, &s, FieldKind::Real),
            Err(Error::Contract(_))
        ));
    }
}
