//! Simulation and estimation under unobserved confounding.
//!
//! [`confound`] holds the linear confounding model (designs, bias/noise
//! decomposition, scenario solving, data generation), [`solvers`] the LASSO,
//! PC-LASSO and PLMM estimators, [`evaluation`] cross-validation and selection
//! metrics, and [`harness`] configuration, ingestion and experiment running.

pub mod confound;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
