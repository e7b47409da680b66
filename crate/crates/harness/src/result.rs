//! Versioned JSON results.

use serde::{Deserialize, Serialize};
use wigner_fluct::stats::LinearFit;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// One estimated quantity confronted with its prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub predicted: Option<f64>,
    /// `(estimate − predicted)/stderr`; absent when undefined (no prediction, or zero
    /// stderr with a nonzero difference).
    pub z_score: Option<f64>,
}

impl Statistic {
    pub fn new(name: impl Into<String>, n: usize, estimate: f64, stderr: f64, predicted: Option<f64>) -> Self {
        let z_score = predicted.and_then(|p| {
            let d = estimate - p;
            if d == 0.0 {
                Some(0.0)
            } else if stderr > 0.0 {
                Some(d / stderr)
            } else {
                None
            }
        });
        Self { name: name.into(), n, estimate, stderr, predicted, z_score }
    }

    pub fn relative_error(&self) -> Option<f64> {
        self.predicted.filter(|p| *p != 0.0).map(|p| (self.estimate - p).abs() / p.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsCheck {
    pub name: String,
    pub n: usize,
    pub replicas: usize,
    pub distance: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub name: String,
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Fit of `ln value` against `ln N`.
    pub fit: LinearFit,
    pub expected_slope: f64,
    pub tolerance: f64,
}

/// Numeric table such as a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub master_seed: u64,
    /// Each replica stream is keyed by `(master_seed, replica index, label)`.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub statistics: Vec<Statistic>,
    pub ks: Vec<KsCheck>,
    pub regressions: Vec<Regression>,
    pub tables: Vec<Table>,
    /// Free-form predictions (functionals, entry laws) for `predict`.
    pub predictions: Option<serde_json::Value>,
    pub checks: Vec<Check>,
    pub seeds: SeedInfo,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
}

impl ExperimentResult {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: config.kind,
            statistics: vec![],
            ks: vec![],
            regressions: vec![],
            tables: vec![],
            predictions: None,
            checks: vec![],
            seeds: SeedInfo { master_seed: config.master_seed, labels: vec![] },
            wall_time_s: 0.0,
            config: config.clone(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    pub fn ks_check(&self, name: &str) -> Option<&KsCheck> {
        self.ks.iter().find(|k| k.name == name)
    }

    pub fn regression(&self, name: &str) -> Option<&Regression> {
        self.regressions.iter().find(|r| r.name == name)
    }

    /// Copy with the wall time zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { wall_time_s: 0.0, ..self.clone() }
    }

    /// Name of the first non-finite number, which JSON cannot carry.
    pub fn first_non_finite(&self) -> Option<String> {
        let mut named: Vec<(String, f64)> = vec![("wall_time_s".into(), self.wall_time_s)];
        for s in &self.statistics {
            named.extend([(s.name.clone(), s.estimate), (s.name.clone(), s.stderr)]);
            named.extend(s.predicted.into_iter().chain(s.z_score).map(|v| (s.name.clone(), v)));
        }
        for k in &self.ks {
            named.extend([(k.name.clone(), k.distance), (k.name.clone(), k.threshold)]);
        }
        for r in &self.regressions {
            let f = &r.fit;
            named.extend(
                r.values.iter().chain(&r.stderrs).chain(&[f.slope, f.intercept, f.slope_stderr, f.slope_ci.0, f.slope_ci.1])
                    .map(|&v| (r.name.clone(), v)),
            );
        }
        for t in &self.tables {
            named.extend(t.rows.iter().flatten().map(|&v| (t.name.clone(), v)));
        }
        named.into_iter().find(|(_, v)| !v.is_finite()).map(|(name, _)| name)
    }

    pub fn to_json(&self) -> Result<String> {
        if let Some(name) = self.first_non_finite() {
            return Err(HarnessError::Numeric(format!("`{name}` is not finite")));
        }
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!("unsupported schema version {}", r.schema_version)));
        }
        Ok(r)
    }
}
