//! Dense tensors, a small reverse-mode autodiff tape and the model stack:
//! feature-token multi-head attention, a denoising autoencoder on top of
//! it, and a classifier trained on the frozen latent codes.
//!
//! Each feature of a row is one token. Token `j` is embedded as
//! `x_j * W_in[j, :] + b_in`, attention runs across the feature axis, and
//! the `(m, model_dim)` output is averaged over tokens before the encoder
//! layer.

mod adam;
mod checkpoint;
mod graph;
mod model;
mod noise;
mod tensor;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, NamedTensor, CHECKPOINT_FORMAT};
pub use graph::{Gradients, Graph, NodeId, PROB_CLAMP};
pub use model::{argmax_rows, mha_forward, Architecture, AttentionParams, ClassifierParams, DaeOutput, DaeParams, ParamList, TabSeqModel};
pub use noise::{corrupt, NoiseConfig};
pub use tensor::Tensor;
pub use train::{
    encode, reconstruction_loss, train_classifier, train_dae, ClassifierEpoch, ClassifierTraining, DaeTraining, EpochLoss,
};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("node was not recorded on this graph")]
    NotRecorded,
    #[error("backward needs a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("{labels} labels for {rows} rows")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("training set contains a single class")]
    SingleClass,
    #[error("training diverged: {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub noise: NoiseConfig,
    pub seed: u64,
    pub model_dim: usize,
    pub heads: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig::default(),
            noise: NoiseConfig::default(),
            seed: 0,
            model_dim: 32,
            heads: 4,
            latent_dim: 32,
            hidden_dim: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(NnError::BadConfig("batch_size must be positive".into()));
        }
        let a = self.adam;
        if !(a.lr > 0.0) || !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(NnError::BadConfig(format!("bad optimizer settings {a:?}")));
        }
        self.noise.validate()
    }
}
