//! Command implementations behind the `lgae` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or file error, 3 numeric
//! failure (non-finite loss, failed gradient check).

mod checkpoint;
mod commands;
mod config;

pub use checkpoint::{Checkpoint, LayerRecord, FORMAT_VERSION};
pub use commands::{
    cmd_eval, cmd_generate, cmd_gradcheck, cmd_train, gradcheck_variant, EvalReport,
    GradcheckEntry, GradcheckReport, TrainOutcome, CHECKPOINT_FILE, GRADCHECK_TOLERANCE,
    LOSS_CSV_FILE,
};
pub use config::{DatasetKind, TrainConfig, DATA_STREAM, EVAL_STREAM_BASE};

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::DataError;
use crate::eval::EvalError;
use crate::models::ModelError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Numeric(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Model(ModelError::UnsupportedKind { .. } | ModelError::InvalidConfig(_)) => {
                EXIT_USAGE
            }
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Model(ModelError::DimensionMismatch { .. } | ModelError::EmptyDataset) => {
                EXIT_DATA
            }
            CliError::Model(_) => EXIT_NUMERIC,
            CliError::Data(_)
            | CliError::Io { .. }
            | CliError::Checkpoint(_)
            | CliError::Eval(_) => EXIT_DATA,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
