//! LGAE, LGAE-KL and VAE.
//!
//! All three share an encoder MLP `D -> hidden -> 2K`, a sampling layer and a
//! decoder MLP `K -> hidden -> D` whose logits pass through a sigmoid.
//!
//! * `lgae`: the encoder output is a Lie-algebra vector `(phi, theta)`,
//!   mapped to a diagonal Gaussian by the closed-form exponential map; the
//!   loss is `lambda * L_LG + L_rec`.
//! * `lgae_kl`: the same pipeline trained with `KL + L_rec`.
//! * `vae`: the encoder emits `(mu, log sigma^2)` directly; `KL + L_rec`.

mod lgae;
mod training;

pub use lgae::{loss_kl, loss_lgae, Encoded, LgaeModel, LossParts, ModelSpec, Reconstruction};
pub use training::{eval_loss, train_epoch, EpochMetrics};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::liegroup::LieGroupError;
use crate::linalg::DenseMatrix;
use crate::nn::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Lgae,
    LgaeKl,
    Vae,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] =
        [ModelVariant::Lgae, ModelVariant::LgaeKl, ModelVariant::Vae];

    /// Whether the encoder output goes through the exponential mapping layer.
    pub fn uses_exp_map(self) -> bool {
        !matches!(self, ModelVariant::Vae)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Lgae => "lgae",
            ModelVariant::LgaeKl => "lgae_kl",
            ModelVariant::Vae => "vae",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lgae" => Ok(ModelVariant::Lgae),
            "lgae_kl" | "lgae-kl" => Ok(ModelVariant::LgaeKl),
            "vae" => Ok(ModelVariant::Vae),
            other => Err(format!("unknown variant `{other}` (lgae, lgae_kl, vae)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    /// Posterior means, `K` wide.
    Mu,
    /// Means followed by standard deviations, `2K` wide.
    MuConcatSigma,
    /// `(phi, theta)`, `2K` wide.
    LieAlgebra,
}

impl RepresentationKind {
    pub const ALL: [RepresentationKind; 3] = [
        RepresentationKind::Mu,
        RepresentationKind::MuConcatSigma,
        RepresentationKind::LieAlgebra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RepresentationKind::Mu => "mu",
            RepresentationKind::MuConcatSigma => "mu_concat_sigma",
            RepresentationKind::LieAlgebra => "lie_algebra",
        }
    }
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepresentationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mu" => Ok(RepresentationKind::Mu),
            "mu_concat_sigma" | "mu-concat-sigma" => Ok(RepresentationKind::MuConcatSigma),
            "lie_algebra" | "lie-algebra" | "g" => Ok(RepresentationKind::LieAlgebra),
            other => Err(format!(
                "unknown representation `{other}` (mu, mu_concat_sigma, lie_algebra)"
            )),
        }
    }
}

/// Encoder-derived feature vectors, one row per input.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    pub kind: RepresentationKind,
    pub vectors: DenseMatrix,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    LieGroup(#[from] LieGroupError),
    #[error("representation `{kind}` is not defined for variant `{variant}`")]
    UnsupportedKind {
        variant: ModelVariant,
        kind: RepresentationKind,
    },
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("loss became non-finite ({0})")]
    NonFiniteLoss(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
