//! Partially wrapped conditional copula regression for spatial cylindrical
//! data: wrapped-normal and log-normal marginal spatial models with
//! nonstationary Matern GMRF effects, covariate-dependent one-parameter
//! copulas, two-stage MCMC estimation, model selection, and proper scoring.

pub mod config;
pub mod copula;
pub mod data;
pub mod density;
pub mod error;
pub mod mcmc;
pub mod pipeline;
pub mod prior;
pub mod score;
pub mod sim;
pub mod math;
pub mod mesh;
pub mod sparse;
pub mod fem;
pub mod spde;

pub use error::{Error, Result};
