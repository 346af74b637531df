//! Two-stage MCMC: margin models with latent spatial fields first, then the
//! copula regression on margin pseudo-observations.

pub mod chain;
pub mod ram;
pub mod stage1;
pub mod stage2;

pub use chain::{ChainOutput, Summary};
pub use ram::RamAdapter;
pub use stage1::{fit_margin, fit_margin_chains, MarginData, MarginFit, Stage1Config};
pub use stage2::{fit_copula, pseudo_observations, CopulaFit, PseudoObs, Stage2Config};
