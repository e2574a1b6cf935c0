//! Bayesian hyperparameter optimization and restart strategies.
//!
//! A Gaussian-process surrogate with a squared-exponential kernel models the
//! objective over a unit-cube search space.  Expected improvement (written in
//! minimization form) drives proposals via seeded multi-start pattern search,
//! and an adaptive restart policy injects pure-exploration points when the
//! incumbent stalls.  The restart submodule benchmarks random versus adaptive
//! restarts for a deterministic hill climber on one-dimensional objectives.

mod acquisition;
mod gp;
mod restart;
mod space;

pub use acquisition::{
    bo_minimize, bo_minimize_with, expected_improvement, propose_next, BoIteration, BoResult,
    BoTrace, Proposal, DEFAULT_REFIT_EVERY,
};
pub use gp::{gp_fit, gp_fit_with_noise, GpSurrogate, DEFAULT_NOISE_VARIANCE};
pub use restart::{
    basin_success_probability, first_arrival_iterations, hill_climb, mc_convergence_probability,
    plateau_objective, restart_benchmark, two_basin_objective, ClimbOutcome, RestartBenchmark,
    RestartPolicy, MIN_CLIMB_STEP,
};
pub use space::{Dimension, SearchSpace};
