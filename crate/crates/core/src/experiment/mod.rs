//! Config-driven experiment runner: load, split, scale, order, train the
//! autoencoder and classifier, evaluate, and persist artifacts. One seed
//! drives every random choice of a run through separate RNG streams.

mod ablation;
mod config;
mod runner;

use thiserror::Error;

use crate::cluster::ClusterError;
use crate::data::DataError;
use crate::eval::EvalError;
use crate::nn::NnError;
use crate::ordering::OrderingError;

pub use ablation::{ablate, ablation_cells, AblationRow, ABLATION_FILE};
pub use config::{AblationConfig, Algorithm, ClusteringConfig, DataConfig, ExperimentConfig, OrderingSection, SplitConfig};
pub use runner::{
    evaluate_checkpoint, evaluate_with, fit, load_checkpoint, load_dataset, load_external_labels, mean_std, order_only, prepare, run_experiment, run_on,
    run_seed, seed_dir, train_only, write_artifacts, ExperimentSummary, Fitted, PipelineMeta, Prepared, SeedOutcome, SeedRun, CHECKPOINT_FILE, LOSSES_FILE,
    METRICS_FILE, ORDERING_FILE, REORDERED_FILE,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("ordering: {0}")]
    Ordering(#[from] OrderingError),
    #[error("clustering: {0}")]
    Cluster(#[from] ClusterError),
    #[error("training: {0}")]
    Nn(#[from] NnError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Output(String),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

impl ExperimentError {
    /// Process exit status: 1 config, 2 data or i/o, 3 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            ExperimentError::Ordering(OrderingError::BadConfig(_)) | ExperimentError::Nn(NnError::BadConfig(_)) => 1,
            ExperimentError::Cluster(ClusterError::BadConfig(_) | ClusterError::ZeroClusters) => 1,
            ExperimentError::Data(_) | ExperimentError::Io { .. } | ExperimentError::Output(_) => 2,
            ExperimentError::Ordering(_) | ExperimentError::Cluster(_) | ExperimentError::Nn(_) | ExperimentError::Eval(_) => 3,
        }
    }
}
