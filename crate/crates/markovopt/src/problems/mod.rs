//! Benchmark problem families: two-state Markovian linear regression,
//! non-convex sigmoid regression over an AR(1) process, and TD(0) policy
//! evaluation on finite Markov reward processes.
//!
//! Instances are regenerable from `(parameters, seed)`; determinism is the
//! storage format, no instance files are persisted.

mod regression;
mod sigmoid_ar;
mod td;

pub use regression::RegressionInstance;
pub use sigmoid_ar::{
    randbimod, MonteCarloObjective, SigmoidArInstance, SigmoidArStream, SigmoidSample,
};
pub use td::{run_td_mag, Mrp, MrpStream, TdOracle, Transition};
