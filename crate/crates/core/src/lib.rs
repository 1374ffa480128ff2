//! Variance estimation for propensity-score weighting estimators of
//! treatment effects on binary outcomes.
//!
//! The crate covers inverse probability and overlap weighting, optional
//! outcome-model augmentation, analytic, numeric and bootstrap standard
//! errors, Wald and bootstrap confidence intervals, and a Monte Carlo harness
//! with a calibrated super-population generator.

pub mod analysis;
pub mod bootstrap;
pub mod ci;
pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod harness;
pub mod linalg;
pub mod report;
pub mod rng;
pub mod sandwich;

pub use error::{Error, Result};
