use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Architecture, ClassifierParams, DaeParams, ParamList, TabSeqModel};
use super::tensor::Tensor;
use super::{NnError, Result, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "tabseq-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Every trained tensor plus what is needed to rebuild the model. Floats
/// are written in shortest round-trip form, so loading is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub train_config: TrainConfig,
    pub architecture: Architecture,
    pub tensors: Vec<NamedTensor>,
    /// Caller-defined context such as scaler statistics or the feature order.
    pub metadata: serde_json::Value,
}

fn named<P: ParamList>(p: &P) -> impl Iterator<Item = NamedTensor> + '_ {
    p.named().into_iter().map(|(name, t)| NamedTensor {
        name: name.to_string(),
        shape: t.shape().to_vec(),
        values: t.data().to_vec(),
    })
}

impl Checkpoint {
    pub fn new(model: &TabSeqModel, arch: Architecture, cfg: &TrainConfig, metadata: serde_json::Value) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            seed: cfg.seed,
            train_config: cfg.clone(),
            architecture: arch,
            tensors: named(&model.dae).chain(named(&model.classifier)).collect(),
            metadata,
        }
    }

    pub fn model(&self) -> Result<TabSeqModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(NnError::Checkpoint(format!("unknown format {:?}", self.format)));
        }
        let arch = self.architecture;
        arch.validate()?;
        // Shapes come from a throwaway initialization; values are overwritten.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = TabSeqModel {
            dae: DaeParams::init(&arch, &mut rng),
            classifier: ClassifierParams::init(&arch, &mut rng),
        };
        let names: Vec<String> = model
            .dae
            .named()
            .iter()
            .chain(model.classifier.named().iter())
            .map(|(n, _)| n.to_string())
            .collect();
        if names.len() != self.tensors.len() {
            return Err(NnError::Checkpoint(format!("expected {} tensors, found {}", names.len(), self.tensors.len())));
        }
        let mut slots = model.dae.tensors_mut();
        slots.extend(model.classifier.tensors_mut());
        for ((slot, name), saved) in slots.into_iter().zip(&names).zip(&self.tensors) {
            if &saved.name != name || saved.shape != slot.shape() {
                return Err(NnError::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {name} {:?}",
                    saved.name,
                    saved.shape,
                    slot.shape()
                )));
            }
            *slot = Tensor::new(saved.shape.clone(), saved.values.clone())?;
        }
        model.dae.attention.heads = arch.heads;
        model.classifier.n_classes = arch.n_classes;
        Ok(model)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        serde_json::from_reader(r).map_err(|e| NnError::Checkpoint(e.to_string()))
    }
}
