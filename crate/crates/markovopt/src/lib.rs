//! Stochastic optimization over Markovian data streams.
//!
//! The centerpiece is MAG: a multi-level Monte Carlo gradient estimator fed
//! into the scalar AdaGrad-Norm step size, which adapts to the mixing time of
//! the data stream without being told it. Around it sit the baselines it is
//! compared against (AdaGrad, SGD, SGD-MLMC, data-drop SGD), exact
//! mixing-time analysis for finite chains, and three benchmark problem
//! families (two-state Markovian regression, non-convex sigmoid regression
//! on an AR(1) process, TD(0) policy evaluation).
//!
//! Module map:
//! - [`chains`]: finite chains, AR(1) processes, stationary distributions,
//!   total variation, `d_mix`, mixing times, eigenvalue bounds, and the
//!   sample streams everything consumes.
//! - [`estimators`]: minibatch and MLMC gradient estimators with full or
//!   truncated geometric level distributions.
//! - [`optim`]: the optimizer loops, projections, and iterate
//!   averaging/selection.
//! - [`problems`]: the benchmark problem families.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`, which is what the CLI harness uses.

pub mod chains;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod optim;
pub mod problems;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the concrete aliases and the CLI harness.
pub type Real = f64;

pub type Chain = chains::FiniteChain<Real>;
pub type ChainDistribution = chains::Distribution<Real>;
pub type Ar1 = chains::Ar1Process<Real>;
pub type Regression = problems::RegressionInstance<Real>;
pub type SigmoidAr = problems::SigmoidArInstance<Real>;
pub type Mrp = problems::Mrp<Real>;
pub type Trace = optim::RunTrace<Real>;
