//! High-order FIR and ARX identification with Hankel nuclear-norm
//! regularization.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`] generates random stable test systems, simulates input/output
//!   records and builds the linear-regression form `Y = Phi^T theta + e`.
//! * [`hankel`] holds the Hankel embedding, its adjoint, singular-value
//!   thresholding and the closed-form weight update used by reweighting.
//! * [`solver`] solves the penalized and residual-constrained weighted
//!   nuclear-norm problems with an ADMM splitting.
//! * [`estimators`] wraps the solvers into least squares, the
//!   validation-constrained (SPARSEVA) nuclear and reweighted-nuclear
//!   estimators, and the cross-validated penalized baseline.
//! * [`metrics`] scores impulse-response fit and summarizes distributions.

pub mod error;
pub mod estimators;
pub mod hankel;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use estimators::{
    cv_nuclear, epsilon, least_squares, least_squares_estimate, sparseva_nuclear,
    sparseva_reweighted, Delta, EpsilonRule, EstimateResult, LambdaSearch, LeastSquares,
    ReweightOptions, Tuning,
};
pub use hankel::{HankelSpec, WeightPair};
pub use metrics::{fit, numerical_rank, summarize, DistSummary};
pub use model::{DataRecord, LinearSystem, ModelStructure, NoiseModel, RegressionData};
pub use rng::Stream;
pub use solver::{
    qcqp_ball_step, solve_constrained, solve_penalized, Block, Mode, Problem, SolverOptions,
    SolverReport,
};
