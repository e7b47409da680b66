//! Experiment configuration, parsed from TOML.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wigner_fluct::cltcore::FormMatrix;
use wigner_fluct::ensembles::{EnsembleSpec, FieldKind, Marginal};
use wigner_fluct::fluctlaw::MIN_SMOOTHNESS;
use wigner_fluct::functions::{Builtin, TestFunction};
use wigner_fluct::matrixfn::ResolventMethod;
use wigner_fluct::semicircle::SpectralPoint;

use crate::{HarnessError, Result};

pub const MIN_REPLICAS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Predict,
    EntryMc,
    ResolventField,
    SchurField,
    QfClt,
    Decoupling,
    Decay,
    HsCheck,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Predict => "predict",
            ExperimentKind::EntryMc => "entry_mc",
            ExperimentKind::ResolventField => "resolvent_field",
            ExperimentKind::SchurField => "schur_field",
            ExperimentKind::QfClt => "qf_clt",
            ExperimentKind::Decoupling => "decoupling",
            ExperimentKind::Decay => "decay",
            ExperimentKind::HsCheck => "hs_check",
        }
    }

    /// Experiments that look at a top-left `m × m` block of an `N × N` matrix.
    fn uses_block(&self) -> bool {
        matches!(
            self,
            ExperimentKind::EntryMc | ExperimentKind::ResolventField | ExperimentKind::SchurField | ExperimentKind::HsCheck
        )
    }

    pub fn samples_matrices(&self) -> bool {
        !matches!(self, ExperimentKind::Predict | ExperimentKind::Decoupling)
    }
}

/// What is subtracted from `f(X)_ij` (or `R_ij`) before scaling by `√N`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Per-entry mean across replicas; removes the O(1/N) bias of the expectation.
    #[default]
    EmpiricalMean,
    /// `δ_ij ∫f dμ_sc`, or `δ_ij g(z)` for resolvents.
    SemicircleIntegral,
    Zero,
}

/// Pass/fail thresholds applied by every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative tolerance on variances and covariances with a nonzero prediction.
    pub relative: f64,
    /// `|z|` bound for statistics predicted to vanish.
    pub z_max: f64,
    /// KS bound; the default is the 1% critical value times the finite-N slack.
    pub ks_max: Option<f64>,
    /// Bound on cross-entry `|corr|`; defaults to `3/√M`.
    pub correlation_max: Option<f64>,
    /// Allowed distance of a fitted log-log slope from its expected value.
    pub slope: f64,
    /// Absolute bound for reconstruction errors.
    pub absolute: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { relative: 0.10, z_max: 3.0, ks_max: None, correlation_max: None, slope: 0.3, absolute: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FormKind {
    Identity,
    /// `diag(1, −1, 1, …)`.
    Alternating,
    /// Nearest-neighbour coupling `1/√2` on a path.
    Hopping,
    /// Projection onto coordinates `start..end`.
    Projection { start: usize, end: usize },
}

impl FormKind {
    pub fn build(&self, n: usize) -> FormMatrix {
        match self {
            FormKind::Identity => FormMatrix::identity(n),
            FormKind::Alternating => FormMatrix::alternating_diagonal(n),
            FormKind::Hopping => FormMatrix::hopping(n),
            FormKind::Projection { start, end } => FormMatrix::coordinate_projection(n, *start..*end),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfConfig {
    pub field: FieldKind,
    /// Each of the `blocks` vectors gets this form; different vectors are uncoupled.
    pub matrix: FormKind,
    pub blocks: usize,
    /// Unit-variance coordinate law.
    pub coordinates: Marginal,
}

impl Default for QfConfig {
    fn default() -> Self {
        Self { field: FieldKind::Real, matrix: FormKind::Identity, blocks: 1, coordinates: Marginal::standard_gaussian() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecouplingCriterion {
    /// Pick by law: Gaussian laws satisfy the expansion exactly, others up to the remainder.
    #[default]
    Auto,
    Stderr,
    RemainderBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingConfig {
    pub law: Marginal,
    pub phi: Builtin,
    pub p: usize,
    /// Monte Carlo sample count; `None` means exact expectations.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub criterion: DecouplingCriterion,
    /// Multiplier on the standard error.
    #[serde(default = "default_k_stderr")]
    pub k_stderr: f64,
}

fn default_k_stderr() -> f64 {
    5.0
}

impl Default for DecouplingConfig {
    fn default() -> Self {
        Self {
            law: Marginal::standard_gaussian(),
            phi: Builtin::Sin { a: 1.0 },
            p: 1,
            samples: Some(1_000_000),
            criterion: DecouplingCriterion::Auto,
            k_stderr: default_k_stderr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HsConfig {
    /// Square grid sizes, coarse to fine.
    pub grids: Vec<usize>,
    /// Orders `l` of the almost-analytic extension.
    pub orders: Vec<usize>,
    pub y_min: f64,
}

impl Default for HsConfig {
    fn default() -> Self {
        Self { grids: vec![100, 200, 400], orders: vec![3, 5], y_min: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayStatistic {
    /// `|E tr_N R(z) − g(z)|`.
    TraceResolvent,
    /// `|E R₁₂(z)|`.
    OffdiagResolvent,
    /// `Var f(X)_ij` over the off-diagonal entries of the block.
    EntryVariance,
    /// `|E f(X)₁₁ − ∫f dμ_sc|`.
    DiagonalMean,
}

impl DecayStatistic {
    pub fn expected_slope(&self) -> f64 {
        match self {
            DecayStatistic::OffdiagResolvent => -1.5,
            _ => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecayConfig {
    pub statistics: Vec<DecayStatistic>,
    /// Test function of the mean statistic; the top-level `function` drives the variance.
    pub mean_function: Builtin,
    /// Replicas for the eigenvalue-based statistics; the top-level count drives the others.
    pub spectral_replicas: usize,
    /// Tolerance on the slope of the off-diagonal resolvent mean.
    pub offdiag_slope_tolerance: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            statistics: vec![DecayStatistic::TraceResolvent, DecayStatistic::EntryVariance, DecayStatistic::DiagonalMean],
            mean_function: Builtin::monomial(4).cut_off(1.0),
            spectral_replicas: 400,
            offdiag_slope_tolerance: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub function: Option<Builtin>,
    pub n: Vec<usize>,
    pub replicas: usize,
    /// Block size.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Spectral points `[re, im]`.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub centering: Centering,
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Raw per-replica values, one row per entry.
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    #[serde(default = "default_method")]
    pub method: ResolventMethod,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub qf: Option<QfConfig>,
    #[serde(default)]
    pub decoupling: Option<DecouplingConfig>,
    #[serde(default)]
    pub hs: Option<HsConfig>,
    #[serde(default)]
    pub decay: Option<DecayConfig>,
}

fn default_m() -> usize {
    2
}

fn default_parallel() -> bool {
    true
}

fn default_method() -> ResolventMethod {
    ResolventMethod::Krylov
}

impl ExperimentConfig {
    /// Settings that reproduce the reference run of each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            ensemble: EnsembleSpec::goe(1.0),
            function: Some(Builtin::monomial(3)),
            n: vec![1000],
            replicas: 5000,
            m: 2,
            points: vec![],
            centering: Centering::EmpiricalMean,
            master_seed: 20240229,
            output: None,
            csv: None,
            parallel: true,
            method: ResolventMethod::Krylov,
            tolerances: Tolerances::default(),
            qf: None,
            decoupling: None,
            hs: None,
            decay: None,
        };
        let field_tolerances = Tolerances { relative: 0.15, ..Tolerances::default() };
        match kind {
            ExperimentKind::Predict => Self { replicas: MIN_REPLICAS, ..base },
            ExperimentKind::EntryMc => {
                Self { ensemble: EnsembleSpec::real_iid(Marginal::rademacher()), ..base }
            }
            ExperimentKind::ResolventField | ExperimentKind::SchurField => Self {
                function: None,
                n: vec![2000],
                replicas: 2000,
                points: vec![[2.5, 0.0], [3.0, 0.0]],
                tolerances: field_tolerances,
                ..base
            },
            ExperimentKind::QfClt => Self {
                function: None,
                n: vec![10_000],
                replicas: 10_000,
                m: 1,
                qf: Some(QfConfig::default()),
                ..base
            },
            ExperimentKind::Decoupling => Self {
                function: None,
                n: vec![1],
                replicas: MIN_REPLICAS,
                m: 1,
                decoupling: Some(DecouplingConfig::default()),
                ..base
            },
            ExperimentKind::Decay => Self {
                function: Some(Builtin::monomial(3).cut_off(1.0)),
                n: vec![250, 500, 1000, 2000],
                replicas: 2000,
                points: vec![[0.0, 3.0]],
                decay: Some(DecayConfig::default()),
                ..base
            },
            ExperimentKind::HsCheck => Self {
                function: Some(Builtin::monomial(1).poly_bump(3.0)),
                n: vec![100],
                replicas: MIN_REPLICAS,
                m: 3,
                hs: Some(HsConfig::default()),
                ..base
            },
        }
    }

    /// Parses TOML; a missing `kind` is taken from `default_kind`, a conflicting one is an error.
    pub fn from_toml(text: &str, default_kind: Option<ExperimentKind>) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        if let Some(kind) = default_kind {
            match table.get("kind").and_then(|v| v.as_str()) {
                None => {
                    table.insert("kind".into(), toml::Value::String(kind.as_str().into()));
                }
                Some(k) if k != kind.as_str() => {
                    return Err(HarnessError::Config(format!("config is for `{k}`, not `{}`", kind.as_str())));
                }
                Some(_) => {}
            }
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn spectral_points(&self) -> Vec<SpectralPoint> {
        self.points.iter().map(|&[re, im]| SpectralPoint::new(re, im)).collect()
    }

    pub fn function(&self) -> Result<&Builtin> {
        self.function
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("`{}` needs a `function` table", self.kind.as_str())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        self.ensemble.validate()?;
        if self.n.is_empty() {
            return bad("`n` must list at least one dimension".into());
        }
        if self.replicas < MIN_REPLICAS && self.kind.samples_matrices() {
            return bad(format!("need at least {MIN_REPLICAS} replicas, got {}", self.replicas));
        }
        if self.kind.uses_block() {
            if self.m == 0 {
                return bad("block size `m` must be positive".into());
            }
            if let Some(&n) = self.n.iter().find(|&&n| n < 4 * self.m) {
                return bad(format!("N = {n} is below 4m = {}", 4 * self.m));
            }
        }
        if let Some(f) = &self.function {
            f.validate()?;
        }
        let params = self.ensemble.params();
        match self.kind {
            ExperimentKind::Predict | ExperimentKind::EntryMc => {
                let f = self.function()?;
                if f.smoothness_class() < MIN_SMOOTHNESS {
                    return bad(format!("{} is C^{}, entry laws need C^{MIN_SMOOTHNESS}", f.name(), f.smoothness_class()));
                }
            }
            ExperimentKind::ResolventField | ExperimentKind::SchurField => {
                if self.points.is_empty() {
                    return bad("field experiments need at least one point".into());
                }
                if let Some(z) = self.spectral_points().iter().find(|z| z.on_cut(&params)) {
                    return bad(format!("point {} lies on the spectral cut", z.z));
                }
            }
            ExperimentKind::Decay => {
                let d = self.decay.clone().unwrap_or_default();
                if d.spectral_replicas < MIN_REPLICAS {
                    return bad(format!("need at least {MIN_REPLICAS} spectral replicas"));
                }
                if self.n.len() < 3 {
                    return bad("a slope fit needs at least three dimensions".into());
                }
                if d.statistics.contains(&DecayStatistic::EntryVariance) && self.m < 2 {
                    return bad("the entry variance needs m ≥ 2".into());
                }
                if d.statistics.contains(&DecayStatistic::EntryVariance) {
                    self.function()?;
                }
                d.mean_function.validate()?;
                if d.statistics.iter().any(|s| matches!(s, DecayStatistic::TraceResolvent | DecayStatistic::OffdiagResolvent))
                {
                    match self.spectral_points().first() {
                        Some(z) if !z.on_cut(&params) => {}
                        _ => return bad("resolvent decay needs one point off the cut".into()),
                    }
                }
            }
            ExperimentKind::HsCheck => {
                self.function()?;
                let hs = self.hs.clone().unwrap_or_default();
                if hs.grids.is_empty() || hs.orders.is_empty() {
                    return bad("hs_check needs at least one grid and one order".into());
                }
            }
            ExperimentKind::QfClt => {
                let qf = self.qf.clone().unwrap_or_default();
                if qf.blocks == 0 {
                    return bad("qf needs at least one vector".into());
                }
                if let FormKind::Projection { start, end } = qf.matrix {
                    if start >= end || end > self.n[0] {
                        return bad(format!("projection {start}..{end} does not fit N = {}", self.n[0]));
                    }
                }
            }
            ExperimentKind::Decoupling => {
                let d = self.decoupling.clone().unwrap_or_default();
                d.phi.validate()?;
                if matches!(d.samples, Some(s) if s < 2) {
                    return bad("Monte Carlo expectations need at least two samples".into());
                }
            }
        }
        Ok(())
    }
}
