//! Environments, datasets, metrics and experiment runners for the cogkit
//! agent.
//!
//! Every run is a pure function of its configuration and seed: rerunning
//! reproduces the metrics file byte for byte.

pub mod config;
pub mod controllers;
pub mod envs;
pub mod idx;
pub mod metrics;
pub mod runners;
pub mod split_mnist;

use std::path::Path;

use thiserror::Error;

pub use config::{ExperimentConfig, Readout};
pub use envs::{EnvError, MazeEnv, RpsEnv};
pub use idx::{load_idx, IdxArray, IdxError};
pub use runners::{run_continual, run_recall, run_rl, ContinualReport, EnvKind, RecallReport, RlReport};
pub use split_mnist::{make_split_mnist, DatasetError, TaskStream};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] cogkit_core::CogError),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("metrics error: {0}")]
    Metrics(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
