//! The cumulant (decoupling) expansion of `E ξφ(ξ)` and the CLT for random sesquilinear forms.
//!
//! Forms are normalized as `N^{-1/2}(⟨u_p, M u_q⟩ − δ_pq Tr M)`, the scaling under which
//! the limiting variances `2σ²_ss + κ₄γ_s` (real) and `σ²_ss + κ₄γ_s/2` (complex) hold.

use std::collections::BTreeMap;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_iid_vector, ExpectationRule, FieldKind, IidVector, Marginal, SeedDerivation};
use crate::fluctlaw::LawComponent;
use crate::functions::TestFunction;
use crate::quadrature;
use crate::stats::{self, VarianceEstimate};
use crate::{normal, Error, Result};

/// Tolerance for the Hermitian pairing check of diagonal blocks.
const HERMITIAN_TOL: f64 = 1e-12;

/// Deterministic `n × n` matrix of a form, in whichever storage suits its structure.
#[derive(Debug, Clone, PartialEq)]
pub enum FormMatrix {
    Diagonal(Vec<Complex64>),
    /// Triplets `(row, col, value)`; repeated positions add up.
    Sparse { n: usize, entries: Vec<(usize, usize, Complex64)> },
    Dense(Mat<Complex64>),
}

impl FormMatrix {
    pub fn identity(n: usize) -> Self {
        FormMatrix::Diagonal(vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn zero(n: usize) -> Self {
        FormMatrix::Sparse { n, entries: Vec::new() }
    }

    /// `diag(+1, −1, +1, …)`.
    pub fn alternating_diagonal(n: usize) -> Self {
        FormMatrix::Diagonal((0..n).map(|i| Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect())
    }

    /// Orthogonal projection onto the coordinates in `range`.
    pub fn coordinate_projection(n: usize, range: std::ops::Range<usize>) -> Self {
        FormMatrix::Diagonal((0..n).map(|i| Complex64::new(if range.contains(&i) { 1.0 } else { 0.0 }, 0.0)).collect())
    }

    /// Zero-diagonal nearest-neighbour matrix with entries `1/√2`, so `tr_N M² → 1`.
    pub fn hopping(n: usize) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let entries = (0..n.saturating_sub(1)).flat_map(|i| [(i, i + 1, h), (i + 1, i, h)]).collect();
        FormMatrix::Sparse { n, entries }
    }

    pub fn n(&self) -> usize {
        match self {
            FormMatrix::Diagonal(d) => d.len(),
            FormMatrix::Sparse { n, .. } => *n,
            FormMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FormMatrix::Sparse { n, entries } => {
                if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= *n || j >= *n) {
                    return Err(Error::DimensionMismatch(format!("entry ({i}, {j}) outside a {n}x{n} form")));
                }
            }
            FormMatrix::Dense(m) if m.nrows() != m.ncols() => {
                return Err(Error::DimensionMismatch(format!("{}x{} form is not square", m.nrows(), m.ncols())));
            }
            _ => {}
        }
        Ok(())
    }

    fn for_each(&self, mut f: impl FnMut(usize, usize, Complex64)) {
        match self {
            FormMatrix::Diagonal(d) => d.iter().enumerate().for_each(|(i, &v)| f(i, i, v)),
            FormMatrix::Sparse { entries, .. } => entries.iter().for_each(|&(i, j, v)| f(i, j, v)),
            FormMatrix::Dense(m) => {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        f(i, j, m[(i, j)]);
                    }
                }
            }
        }
    }

    /// Dense copy; sparse duplicates are summed.
    pub fn to_dense(&self) -> Mat<Complex64> {
        let n = self.n();
        let mut m = Mat::<Complex64>::zeros(n, n);
        self.for_each(|i, j, v| m[(i, j)] += v);
        m
    }

    pub fn adjoint(&self) -> Self {
        match self {
            FormMatrix::Diagonal(d) => FormMatrix::Diagonal(d.iter().map(|v| v.conj()).collect()),
            FormMatrix::Sparse { n, entries } => {
                FormMatrix::Sparse { n: *n, entries: entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect() }
            }
            FormMatrix::Dense(m) => FormMatrix::Dense(m.adjoint().to_owned()),
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        match self {
            FormMatrix::Diagonal(d) => d.iter().zip(x).map(|(a, b)| a * b).collect(),
            FormMatrix::Sparse { n, entries } => {
                let mut y = vec![Complex64::new(0.0, 0.0); *n];
                for &(i, j, v) in entries {
                    y[i] += v * x[j];
                }
                y
            }
            FormMatrix::Dense(m) => {
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        let mut t = Complex64::new(0.0, 0.0);
        self.for_each(|i, j, v| {
            if i == j {
                t += v
            }
        });
        t
    }

    /// Entries with repeated positions summed.
    fn merged(&self) -> BTreeMap<(usize, usize), Complex64> {
        let mut map = BTreeMap::new();
        self.for_each(|i, j, v| *map.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += v);
        map
    }

    /// `Σ |M_ij|² = Tr(M M*)`.
    pub fn frobenius_sq(&self) -> f64 {
        match self {
            FormMatrix::Sparse { .. } => self.merged().values().map(|v| v.norm_sqr()).sum(),
            _ => {
                let mut s = 0.0;
                self.for_each(|_, _, v| s += v.norm_sqr());
                s
            }
        }
    }

    /// `Σ |M_ii|²`.
    pub fn diagonal_sq(&self) -> f64 {
        let mut diag = vec![Complex64::new(0.0, 0.0); self.n()];
        self.for_each(|i, j, v| {
            if i == j {
                diag[i] += v
            }
        });
        diag.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn is_real(&self) -> bool {
        let mut real = true;
        self.for_each(|_, _, v| real &= v.im == 0.0);
        real
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.frobenius_sq().sqrt().max(1.0);
        let close = |a: Complex64, b: Complex64| (a - b.conj()).norm() <= HERMITIAN_TOL * scale;
        match self {
            FormMatrix::Diagonal(d) => d.iter().all(|&v| close(v, v)),
            FormMatrix::Sparse { .. } => {
                let map = self.merged();
                let zero = Complex64::new(0.0, 0.0);
                map.iter().all(|(&(i, j), &v)| close(v, map.get(&(j, i)).copied().unwrap_or(zero)))
            }
            FormMatrix::Dense(d) => (0..d.nrows()).all(|i| (0..d.ncols()).all(|j| close(d[(i, j)], d[(j, i)]))),
        }
    }
}

/// Blocks `M^(s,t)`, `s ≤ t`, of a family of forms; `M^(t,s) = (M^(s,t))*` is implied.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormSpec {
    pub field: FieldKind,
    m: usize,
    /// Upper triangle in row-major order: (0,0), (0,1), …, (0,m−1), (1,1), …
    upper: Vec<FormMatrix>,
}

impl QuadraticFormSpec {
    pub fn new(field: FieldKind, m: usize, upper: Vec<FormMatrix>) -> Result<Self> {
        if m == 0 || upper.len() != m * (m + 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "{m} blocks need {} upper-triangular matrices, got {}",
                m * (m + 1) / 2,
                upper.len()
            )));
        }
        let n = upper[0].n();
        let spec = Self { field, m, upper };
        for (s, t) in spec.pairs() {
            let b = spec.block(s, t);
            b.validate()?;
            if b.n() != n {
                return Err(Error::DimensionMismatch(format!("block ({s}, {t}) is {}x{0}, expected {n}x{n}", b.n())));
            }
            if s == t && !b.is_hermitian() {
                return Err(Error::Contract(format!("diagonal block ({s}, {s}) must be self-adjoint")));
            }
            if field == FieldKind::Real && !b.is_real() {
                return Err(Error::Contract(format!("block ({s}, {t}) has complex entries in a real form")));
            }
        }
        Ok(spec)
    }

    /// Single form `⟨u, M u⟩`.
    pub fn single(field: FieldKind, matrix: FormMatrix) -> Result<Self> {
        Self::new(field, 1, vec![matrix])
    }

    /// Given diagonal blocks and zero couplings between different vectors.
    pub fn block_diagonal(field: FieldKind, diagonal: Vec<FormMatrix>) -> Result<Self> {
        let m = diagonal.len();
        let n = diagonal.first().map_or(0, FormMatrix::n);
        let mut it = diagonal.into_iter();
        let upper = (0..m)
            .flat_map(|s| (s..m).map(move |t| (s, t)))
            .map(|(s, t)| if s == t { it.next().expect("one block per index") } else { FormMatrix::zero(n) })
            .collect();
        Self::new(field, m, upper)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.upper[0].n()
    }

    /// Upper-triangular index pairs in storage order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.m).flat_map(|s| (s..self.m).map(move |t| (s, t))).collect()
    }

    pub fn block(&self, s: usize, t: usize) -> &FormMatrix {
        debug_assert!(s <= t && t < self.m);
        &self.upper[s * self.m - s * s.saturating_sub(1) / 2 + t - s]
    }

    /// `σ²_{s,t} = tr_N(M^(s,t) M^(t,s))`.
    pub fn sigma2(&self, s: usize, t: usize) -> f64 {
        let (a, b) = (s.min(t), s.max(t));
        self.block(a, b).frobenius_sq() / self.n() as f64
    }

    /// `γ_s = N⁻¹ Σ_i |M^(s,s)_ii|²`.
    pub fn gamma(&self, s: usize) -> f64 {
        self.block(s, s).diagonal_sq() / self.n() as f64
    }

    /// Limiting variance of the chosen component of `g_{p,q}`; `kappa4` is the fourth
    /// cumulant of the standardized coordinate law (of `√2 Re u_i` in the complex case).
    pub fn predicted_variance(&self, p: usize, q: usize, component: LawComponent, kappa4: f64) -> f64 {
        match (self.field, p == q) {
            (FieldKind::Real, true) => 2.0 * self.sigma2(p, p) + kappa4 * self.gamma(p),
            (FieldKind::Complex, true) => self.sigma2(p, p) + 0.5 * kappa4 * self.gamma(p),
            (FieldKind::Real, false) => self.sigma2(p, q),
            (FieldKind::Complex, false) => match component {
                LawComponent::Value => self.sigma2(p, q),
                LawComponent::Re | LawComponent::Im => 0.5 * self.sigma2(p, q),
            },
        }
    }
}

fn as_complex(v: IidVector) -> Vec<Complex64> {
    match v {
        IidVector::Real(x) => x.into_iter().map(|r| Complex64::new(r, 0.0)).collect(),
        IidVector::Complex(x) => x,
    }
}

/// `N^{-1/2}(⟨u_p, M u_q⟩ − δ_pq Tr M)`, conjugate-linear in `u_p`.
pub fn quadratic_form_stat(u_p: &[Complex64], u_q: &[Complex64], matrix: &FormMatrix, same: bool) -> Result<Complex64> {
    let n = matrix.n();
    if u_p.len() != n || u_q.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {} against a {n}x{n} form",
            u_p.len(),
            u_q.len()
        )));
    }
    let mu = matrix.apply(u_q);
    let mut form: Complex64 = u_p.iter().zip(&mu).map(|(a, b)| a.conj() * b).sum();
    if same {
        form -= matrix.trace();
    }
    Ok(form / (n as f64).sqrt())
}

/// Upper triangle of `G_N` for one draw of `u^(1), …, u^(m)`.
pub fn qf_replica(spec: &QuadraticFormSpec, coordinates: &Marginal, seed: &SeedDerivation) -> Result<Vec<Complex64>> {
    let us: Vec<Vec<Complex64>> = (0..spec.m())
        .map(|s| sample_iid_vector(coordinates, spec.n(), &seed.child(&format!("u{s}")), spec.field).map(as_complex))
        .collect::<Result<_>>()?;
    spec.pairs()
        .into_iter()
        .map(|(p, q)| quadratic_form_stat(&us[p], &us[q], spec.block(p, q), p == q))
        .collect()
}

/// Agreement of one component of `g_{p,q}` with its Gaussian limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfComponentReport {
    pub p: usize,
    pub q: usize,
    pub component: LawComponent,
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: VarianceEstimate,
    pub predicted_variance: f64,
    pub z_score: f64,
    pub ks: f64,
    pub ks_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfCltReport {
    pub replicas: usize,
    pub components: Vec<QfComponentReport>,
    /// Largest `|corr|` between distinct components; independence predicts zero.
    pub max_abs_correlation: f64,
    pub correlation_threshold: f64,
}

/// Samples `G_N` over `replicas` independent draws and compares every independent
/// real component with its predicted Gaussian law.
pub fn qf_clt_experiment(
    spec: &QuadraticFormSpec,
    coordinates: &Marginal,
    replicas: usize,
    master_seed: u64,
) -> Result<QfCltReport> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("need at least two replicas".into()));
    }
    let kappa4 = coordinates.cumulant(4)?;
    let draws: Vec<Vec<Complex64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| qf_replica(spec, coordinates, &SeedDerivation::new(master_seed, r, "qf-clt")))
        .collect::<Result<_>>()?;
    let mut series: Vec<(usize, usize, LawComponent, Vec<f64>)> = Vec::new();
    for (k, (p, q)) in spec.pairs().into_iter().enumerate() {
        let re: Vec<f64> = draws.iter().map(|d| d[k].re).collect();
        if spec.field == FieldKind::Complex && p != q {
            series.push((p, q, LawComponent::Re, re));
            series.push((p, q, LawComponent::Im, draws.iter().map(|d| d[k].im).collect()));
        } else {
            series.push((p, q, LawComponent::Value, re));
        }
    }
    let components = series
        .iter()
        .map(|(p, q, c, xs)| {
            let predicted = spec.predicted_variance(*p, *q, *c, kappa4);
            let variance = stats::variance_estimate(xs);
            let (mean, mean_stderr) = stats::mean_stderr(xs);
            QfComponentReport {
                p: *p,
                q: *q,
                component: *c,
                mean,
                mean_stderr,
                variance,
                predicted_variance: predicted,
                z_score: z_score(variance.variance, predicted, variance.stderr),
                ks: stats::ks_statistic(&stats::sorted(xs), |t| normal::cdf_with_variance(t, predicted)),
                ks_threshold: stats::ks_threshold(replicas),
            }
        })
        .collect();
    let mut max_corr = 0.0f64;
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            max_corr = max_corr.max(stats::correlation(&series[a].3, &series[b].3).abs());
        }
    }
    Ok(QfCltReport {
        replicas,
        components,
        max_abs_correlation: max_corr,
        correlation_threshold: 3.0 / (replicas as f64).sqrt(),
    })
}

/// `(estimate − predicted)/stderr`, zero when both agree exactly.
pub fn z_score(estimate: f64, predicted: f64, stderr: f64) -> f64 {
    let d = estimate - predicted;
    if d == 0.0 {
        0.0
    } else if stderr == 0.0 {
        d.signum() * f64::INFINITY
    } else {
        d / stderr
    }
}

/// How the expectations in the decoupling expansion are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectationMode {
    /// Enumeration or quadrature of the marginal; no sampling error.
    Exact,
    MonteCarlo { samples: usize, seed: SeedDerivation },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub p_order: usize,
    pub lhs: f64,
    pub expansion: f64,
    pub residual: f64,
    /// Zero in exact mode.
    pub stderr: f64,
    pub constant: f64,
    pub sup_derivative: f64,
    pub abs_moment: f64,
    /// `C_p sup|φ^(p+1)| E|ξ|^{p+2}`.
    pub remainder_bound: f64,
}

impl DecouplingReport {
    /// `|residual| ≤ k·stderr + remainder bound`, with a round-off floor.
    pub fn within_bound(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.stderr + self.remainder_bound + 1e-12 * self.lhs.abs().max(1.0)
    }

    /// `|residual| ≤ k·stderr`, for expansions that are exact for the law at hand.
    pub fn within_stderr(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.stderr + 1e-12 * self.lhs.abs().max(1.0)
    }
}

/// Remainder constant `(1 + (3 + 2p)^{p+2})/(p+1)!` of the truncated cumulant expansion.
pub fn decoupling_constant(p: usize) -> f64 {
    let fact: f64 = (1..=p + 1).map(|k| k as f64).product();
    (1.0 + (3.0 + 2.0 * p as f64).powi(p as i32 + 2)) / fact
}

const SUP_GRID: usize = 4001;
/// Continuous laws are scanned over at most this many standard deviations.
const SUP_RANGE_SD: f64 = 12.0;

fn sup_abs_derivative(phi: &dyn TestFunction, k: usize, lo: f64, hi: f64) -> Result<f64> {
    quadrature::linspace(lo, hi, SUP_GRID)
        .into_iter()
        .try_fold(0.0f64, |m, x| Ok(m.max(phi.derivative(k, x)?.abs())))
}

/// Checks `E ξφ(ξ) = Σ_{a≤p} κ_{a+1}/a!·E φ^(a)(ξ) + ε` against the remainder bound.
pub fn decoupling_check(
    xi: &Marginal,
    phi: &dyn TestFunction,
    p_order: usize,
    mode: &ExpectationMode,
) -> Result<DecouplingReport> {
    xi.validate()?;
    if p_order > 3 {
        return Err(Error::InvalidParameter(format!("cumulants are available for p ≤ 3, got {p_order}")));
    }
    let abs_moment = xi.abs_moment(p_order as u32 + 2);
    if !abs_moment.is_finite() {
        return Err(Error::InsufficientMoments { name: xi.name().into(), needed: p_order + 2 });
    }
    let kappas: Vec<f64> = (1..=p_order as u32 + 1).map(|k| xi.cumulant(k)).collect::<Result<_>>()?;
    let fact = |a: usize| (1..=a).map(|k| k as f64).product::<f64>();
    // Per-point difference ξφ(ξ) − Σ κ_{a+1}/a!·φ^(a)(ξ), plus its two halves.
    if p_order + 1 > phi.max_order() {
        return Err(Error::DerivativeOrder { name: phi.name(), requested: p_order + 1, max: phi.max_order() });
    }
    let terms = |x: f64| -> Result<(f64, f64)> {
        let jet = phi.jet(x, p_order);
        let expansion = (0..=p_order).map(|a| kappas[a] / fact(a) * jet.derivative(a)).sum::<f64>();
        Ok((x * jet.value(), expansion))
    };
    let (lhs, expansion, stderr, range) = match mode {
        ExpectationMode::Exact => {
            let (nodes, weights) = match xi.expectation_rule() {
                ExpectationRule::Atoms(a) => a.into_iter().unzip(),
                ExpectationRule::Quadrature { nodes, weights } => (nodes, weights),
                ExpectationRule::Gaussian { sd } => {
                    let r = quadrature::gauss_hermite_prob(64)?;
                    (r.nodes.iter().map(|z| sd * z).collect(), r.weights)
                }
            };
            let (mut l, mut e) = (0.0, 0.0);
            for (&x, &w) in nodes.iter().zip(&weights) {
                let (a, b) = terms(x)?;
                l += w * a;
                e += w * b;
            }
            (l, e, 0.0, None)
        }
        ExpectationMode::MonteCarlo { samples, seed } => {
            if *samples < 2 {
                return Err(Error::InvalidParameter("need at least two samples".into()));
            }
            let mut rng = seed.rng();
            let xs: Vec<f64> = (0..*samples).map(|_| xi.sample(&mut rng)).collect();
            let pairs: Vec<(f64, f64)> = xs.iter().map(|&x| terms(x)).collect::<Result<_>>()?;
            let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
            let (_, se) = stats::mean_stderr(&diffs);
            let l = stats::mean(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let e = stats::mean(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (l, e, se, Some((lo, hi)))
        }
    };
    let (lo, hi) = range.unwrap_or_else(|| {
        let (lo, hi) = xi.support();
        let r = SUP_RANGE_SD * xi.variance().sqrt();
        (lo.max(-r), hi.min(r))
    });
    let sup = sup_abs_derivative(phi, p_order + 1, lo, hi)?;
    let constant = decoupling_constant(p_order);
    Ok(DecouplingReport {
        p_order,
        lhs,
        expansion,
        residual: lhs - expansion,
        stderr,
        constant,
        sup_derivative: sup,
        abs_moment,
        remainder_bound: constant * sup * abs_moment,
    })
}
