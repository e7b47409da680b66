//! Monte Carlo experiments that confront sampled Wigner matrices with the limiting
//! fluctuation laws, plus configuration, persistence and the `wfluct` CLI plumbing.

pub mod config;
pub mod experiments;
pub mod replicas;
pub mod result;

pub use config::{Centering, ExperimentConfig, ExperimentKind};
pub use experiments::run;
pub use result::{ExperimentResult, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] wigner_fluct::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
