//! Core algorithms for a hybrid predictive system: four base learners
//! (a variational Bayesian neural network, a random forest, gradient
//! boosting, and a linear SVM), optimized weighted ensembling, stacking,
//! mutual-information feature integration, Gaussian-process hyperparameter
//! search, and restart strategies for non-convex fits.
//!
//! Everything is deterministic given a seed: all randomness flows through
//! [`rng`], which derives independent named streams from one root seed.

pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod feature_integration;
pub mod hyperopt;
pub mod learners;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod stacking;
pub mod stats;
pub mod synthetic;

pub use error::MedleyError;

pub type Result<T> = std::result::Result<T, MedleyError>;
