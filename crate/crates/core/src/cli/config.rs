use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Blobs, Dataset, Split, MNIST_SIDE};
use crate::models::{ModelSpec, ModelVariant};
use crate::nn::Rng;

use super::{CliError, Result};

/// Stream used for synthetic data so that it never shares draws with
/// initialization, shuffling or sampling noise.
pub const DATA_STREAM: u64 = 1;
/// Streams from here on are used for held-out evaluation, one per epoch.
pub const EVAL_STREAM_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    Blobs,
}

/// Flat training configuration. Every field has a default, so a config file
/// only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: ModelVariant,
    pub k: usize,
    pub hidden: usize,
    pub lambda: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub samples_per_input: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetKind,
    /// Use only the first `n` training / test examples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_limit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
    pub blob_n: usize,
    pub blob_test_n: usize,
    pub blob_dim: usize,
    pub blob_classes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::Lgae,
            k: 10,
            hidden: 500,
            lambda: 0.5,
            lr: 0.01,
            batch_size: 100,
            epochs: 30,
            seed: 0,
            samples_per_input: 1,
            data_dir: None,
            out_dir: None,
            dataset: DatasetKind::Mnist,
            train_limit: None,
            test_limit: None,
            blob_n: 512,
            blob_test_n: 128,
            blob_dim: 64,
            blob_classes: 4,
        }
    }
}

impl TrainConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be a finite non-negative number");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.samples_per_input == 0 {
            return bad("samples_per_input must be at least 1");
        }
        if self.train_limit == Some(0) || self.test_limit == Some(0) {
            return bad("limits must be positive");
        }
        if self.dataset == DatasetKind::Blobs {
            if self.blob_n == 0 || self.blob_test_n == 0 || self.blob_dim == 0 {
                return bad("blob sizes must be positive");
            }
            if !(1..=256).contains(&self.blob_classes) {
                return bad("blob_classes must be in 1..=256");
            }
        }
        Ok(())
    }

    /// The copy stored in checkpoints: machine-specific paths removed.
    pub fn echo(&self) -> Self {
        Self {
            data_dir: None,
            out_dir: None,
            ..self.clone()
        }
    }

    pub fn model_spec(&self, input_dim: usize) -> ModelSpec {
        ModelSpec {
            variant: self.variant,
            input_dim,
            hidden: self.hidden,
            latent_dim: self.k,
            lambda: self.lambda,
            samples_per_input: self.samples_per_input,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.dataset {
            DatasetKind::Mnist => MNIST_SIDE * MNIST_SIDE,
            DatasetKind::Blobs => self.blob_dim,
        }
    }

    pub fn image_shape(&self) -> (usize, usize) {
        match self.dataset {
            DatasetKind::Mnist => (MNIST_SIDE, MNIST_SIDE),
            DatasetKind::Blobs => {
                let d = self.blob_dim;
                let side = (d as f64).sqrt().round() as usize;
                if side * side == d {
                    (side, side)
                } else {
                    (1, d)
                }
            }
        }
    }

    /// Explicit `data_dir`, else `$LGAE_DATA_DIR`, else `data/mnist`.
    pub fn resolved_data_dir(&self) -> PathBuf {
        match &self.data_dir {
            Some(d) => d.clone(),
            None => data::resolve_data_dir("data/mnist"),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs/latest"))
    }

    /// Training and test sets.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let (train, test) = match self.dataset {
            DatasetKind::Mnist => {
                let dir = self.resolved_data_dir();
                (
                    data::load_mnist(&dir, Split::Train)?,
                    data::load_mnist(&dir, Split::Test)?,
                )
            }
            DatasetKind::Blobs => {
                let mut rng = Rng::with_stream(self.seed, DATA_STREAM);
                let blobs = Blobs::new(&mut rng, self.blob_dim, self.blob_classes);
                let train = blobs.sample(&mut rng, self.blob_n);
                let test = blobs.sample(&mut rng, self.blob_test_n);
                (train, test)
            }
        };
        let cut = |d: Dataset, n: Option<usize>| match n {
            Some(n) if n < d.len() => d.truncated(n),
            _ => d,
        };
        Ok((cut(train, self.train_limit), cut(test, self.test_limit)))
    }
}
