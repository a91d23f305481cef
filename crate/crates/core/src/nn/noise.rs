use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::{NnError, Result};

/// Input corruption for the denoising autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseConfig {
    /// Additive `N(0, sigma^2)`, then clamped to `[0, 1]`.
    Gaussian { sigma: f64 },
    /// Each entry is zeroed independently with probability `fraction`.
    Mask { fraction: f64 },
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::Gaussian { sigma: 0.1 }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseConfig::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(NnError::BadConfig(format!("noise sigma {sigma} must be >= 0")))
            }
            NoiseConfig::Mask { fraction } if !(0.0..1.0).contains(&fraction) => {
                Err(NnError::BadConfig(format!("mask fraction {fraction} outside [0, 1)")))
            }
            _ => Ok(()),
        }
    }
}

pub fn corrupt<R: Rng>(x: &Tensor, cfg: &NoiseConfig, rng: &mut R) -> Result<Tensor> {
    cfg.validate()?;
    let mut out = x.clone();
    match *cfg {
        NoiseConfig::Gaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(out);
            }
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            for v in out.data_mut() {
                *v = (*v + normal.sample(rng)).clamp(0.0, 1.0);
            }
        }
        NoiseConfig::Mask { fraction } => {
            if fraction == 0.0 {
                return Ok(out);
            }
            for v in out.data_mut() {
                if rng.gen::<f64>() < fraction {
                    *v = 0.0;
                }
            }
        }
    }
    Ok(out)
}
