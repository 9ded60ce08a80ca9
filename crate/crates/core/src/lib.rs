//! Bayesian optimization over mixed real, integer and categorical search
//! spaces.

pub mod acquisition;
pub mod baselines;
pub mod bo_engine;
pub mod error;
pub mod gp_model;
pub mod harness;
pub mod hyper_sampler;
pub mod kernels;
pub mod plot;
pub mod search_space;
pub mod synthetic;

pub use error::{Error, Result};
