//! A small dense network engine: fully connected layers with tanh/sigmoid
//! activations, hand-written reverse-mode gradients, Adagrad, a seeded
//! generator, and a finite-difference gradient checker.

mod adagrad;
mod gradcheck;
mod layers;
mod loss;
mod rng;

pub use adagrad::{adagrad_step, AdagradState, ADAGRAD_EPS};
pub use gradcheck::{gradient_check, GradCheckReport, FD_STEP};
pub use layers::{init_params, Activation, ForwardCache, LinearLayer, Mlp, INIT_STD};
pub use loss::{bce_with_logits, bce_with_logits_grad, sigmoid};
pub use rng::{gaussian_draws, Rng, RngState};

pub use crate::linalg::DenseMatrix;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NnError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("forward cache does not match this network or gradient shape")]
    StaleCache,
    #[error("need at least two layer sizes")]
    TooFewLayers,
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
