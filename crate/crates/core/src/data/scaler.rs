use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};

/// Out-of-range guard applied to min-max scaled values of unseen rows.
pub const MINMAX_CLAMP: (f64, f64) = (-0.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    #[default]
    Minmax01,
    Zscore,
}

/// Fitted per-feature statistics. For `Minmax01` these are (min, max), for
/// `Zscore` (mean, population stddev).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mode: ScaleMode,
    pub stats: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    mode: ScaleMode,
    params: Option<ScalerParams>,
}

impl Scaler {
    pub fn new(mode: ScaleMode) -> Self {
        Self { mode, params: None }
    }

    pub fn from_params(params: ScalerParams) -> Self {
        Self {
            mode: params.mode,
            params: Some(params),
        }
    }

    pub fn params(&self) -> Option<&ScalerParams> {
        self.params.as_ref()
    }

    pub fn fit(&mut self, train: &Dataset) -> &ScalerParams {
        self.params.insert(fit_scaler(train, self.mode))
    }

    pub fn transform(&self, d: &Dataset) -> Result<Dataset> {
        let p = self.params.as_ref().ok_or(DataError::UnfittedScaler)?;
        apply_scaler(d, p)
    }
}

pub fn fit_scaler(train: &Dataset, mode: ScaleMode) -> ScalerParams {
    let stats = train
        .values
        .columns()
        .into_iter()
        .map(|col| match mode {
            ScaleMode::Minmax01 => col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
            ScaleMode::Zscore => {
                let n = col.len() as f64;
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
        })
        .collect();
    ScalerParams { mode, stats }
}

pub fn apply_scaler(d: &Dataset, p: &ScalerParams) -> Result<Dataset> {
    if p.stats.len() != d.n_features() {
        return Err(DataError::FeatureMismatch {
            expected: p.stats.len(),
            found: d.n_features(),
        });
    }
    let mut out = d.clone();
    for (mut col, &(a, b)) in out.values.columns_mut().into_iter().zip(&p.stats) {
        match p.mode {
            ScaleMode::Minmax01 => {
                let range = b - a;
                col.mapv_inplace(|v| {
                    if range > 0.0 {
                        ((v - a) / range).clamp(MINMAX_CLAMP.0, MINMAX_CLAMP.1)
                    } else {
                        0.0
                    }
                });
            }
            ScaleMode::Zscore => {
                col.mapv_inplace(|v| if b > 0.0 { (v - a) / b } else { 0.0 });
            }
        }
    }
    Ok(out)
}
