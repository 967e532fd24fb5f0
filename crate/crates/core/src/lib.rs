//! Lie group auto-encoder.
//!
//! Gaussians are points of the UTDAT Lie group ([`liegroup`]). The encoder of
//! an [`models::LgaeModel`] outputs coordinates in the group's Lie algebra,
//! an exponential mapping layer turns them into diagonal Gaussians, and a
//! latent code is drawn by transforming standard normal noise. Training
//! minimizes reconstruction cross-entropy plus either the Lie-group
//! intrinsic loss (squared geodesic distance to the standard Gaussian) or
//! the KL divergence used by the VAE baselines.

pub mod cli;
pub mod data;
pub mod eval;
pub mod liegroup;
pub mod linalg;
pub mod models;
pub mod nn;
