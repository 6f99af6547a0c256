//! Numerical laboratory for linear n-th order stochastic differential
//! equations on [0,1] driven by additive white noise, with linear boundary
//! conditions supported on finitely many points.
//!
//! The solution law is Gaussian and constructed exactly through the Green
//! function of the boundary value problem; on top of it the crate provides
//! conditional-independence diagnostics (Markov-field, enlarged-conditioning,
//! and Markov-process splits of the boundary operator), boundary-operator
//! classification, Monte Carlo path sampling, and a coefficient-perturbation
//! convergence experiment.

pub mod boundary;
pub mod error;
pub mod green;
pub mod law;
pub mod markov;
pub mod ode;
pub mod problem;
pub mod sampler;
pub mod suite;
pub mod tol;

pub use error::{Error, Result};
pub use green::GreenTable;
pub use ode::FlowTable;
pub use problem::{
    BoundaryOperator, Coefficient, CoefficientSet, Grid, ProblemSpec, ValidatedProblem,
};
pub use tol::Tolerances;
