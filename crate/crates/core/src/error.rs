use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("spectral point {re}{im:+}i lies on the cut [-2σ, 2σ] (σ = {sigma})")]
    OnCut { re: f64, im: f64, sigma: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fourth cumulant {kappa4} is below the Bernoulli floor {floor}")]
    InvalidCumulant { kappa4: f64, floor: f64 },

    #[error("internal consistency violated: {quantity} = {value:e}")]
    InternalConsistency { quantity: &'static str, value: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("near-singular system: {0}")]
    NearSingular(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("derivative of order {requested} requested, function {name} declares at most {max}")]
    DerivativeOrder { name: String, requested: usize, max: usize },

    #[error("marginal {name} lacks the {needed} moments required")]
    InsufficientMoments { name: String, needed: usize },
}
