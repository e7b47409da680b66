//! Fluctuations of matrix entries of regular functions of Wigner matrices.
//!
//! The crate is organised bottom-up:
//!
//! * [`semicircle`]: density, Stieltjes transform, two-point kernels of
//!   the semicircle law, plus Gauss–Chebyshev quadrature against it.
//! * [`functions`] and [`functionals`]: smooth test functions with Taylor-mode
//!   derivatives and the spectral functionals (ω², α, β, v₁², v₂², d²) built on them.
//! * [`ensembles`]: marginal laws with cumulants, Wigner samplers and seed derivation.
//! * [`matrixfn`]: entries of f(X) by spectral decomposition or linear solves, the
//!   Helffer–Sjöstrand reconstruction, the Schur-complement field.
//! * [`fluctlaw`]: the limiting entry laws and the resolvent-field covariances.
//! * [`cltcore`]: the decoupling formula and the CLT for random sesquilinear forms.

pub mod cltcore;
pub mod ensembles;
pub mod error;
pub mod fluctlaw;
pub mod functionals;
pub mod functions;
pub mod jet;
pub mod matrixfn;
pub mod normal;
pub mod quadrature;
pub mod scalar;
pub mod semicircle;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
