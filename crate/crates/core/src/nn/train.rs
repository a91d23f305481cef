use log::{debug, warn};
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::graph::Graph;
use super::model::{argmax_rows, Architecture, ClassifierParams, DaeParams, ParamList};
use super::noise::corrupt;
use super::tensor::Tensor;
use super::{NnError, Result, TrainConfig};
use crate::rng::{seeded, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean reconstruction MSE over the epoch's mini-batches, weighted by
    /// batch size, measured on corrupted inputs.
    pub train_loss: f64,
    /// MSE on clean validation inputs after the epoch.
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DaeTraining {
    pub params: DaeParams,
    pub curve: Vec<EpochLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy on the whole training set after the epoch.
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassifierTraining {
    pub params: ClassifierParams,
    pub curve: Vec<ClassifierEpoch>,
}

fn gather(x: ArrayView2<'_, f64>, rows: &[usize]) -> Tensor {
    Tensor::from_array(x.select(Axis(0), rows).view())
}

fn effective_batch(batch_size: usize, n: usize) -> usize {
    if batch_size > n {
        warn!("batch size {batch_size} exceeds {n} samples; using full batch");
        n
    } else {
        batch_size
    }
}

fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(NnError::NonFinite(format!("loss {loss} in epoch {epoch}")))
    }
}

/// Mean squared reconstruction error of clean inputs.
pub fn reconstruction_loss(p: &DaeParams, x: ArrayView2<'_, f64>) -> Result<f64> {
    let mut total = 0.0;
    for start in (0..x.nrows()).step_by(256) {
        let end = (start + 256).min(x.nrows());
        let xb = Tensor::from_array(x.slice(ndarray::s![start..end, ..]));
        total += p.forward(&xb, &xb)?.loss * xb.len() as f64;
    }
    Ok(total / x.len() as f64)
}

/// Trains the attention autoencoder to reconstruct clean rows from
/// corrupted ones. `cfg.seed` drives initialization, shuffling and noise.
pub fn train_dae(train: ArrayView2<'_, f64>, val: Option<ArrayView2<'_, f64>>, cfg: &TrainConfig) -> Result<DaeTraining> {
    cfg.validate()?;
    let (n, m) = train.dim();
    if n == 0 {
        return Err(NnError::BadConfig("empty training set".into()));
    }
    if let Some(v) = val {
        if v.ncols() != m {
            return Err(NnError::Shape(format!("validation has {} features, training {m}", v.ncols())));
        }
    }
    if train.iter().any(|&v| !(-0.5..=1.5).contains(&v)) {
        warn!("autoencoder input outside [-0.5, 1.5]; is the data scaled?");
    }
    // The class count only shapes the classifier head.
    let arch = Architecture::new(m, 2, cfg);
    arch.validate()?;
    let mut params = DaeParams::init(&arch, &mut seeded(cfg.seed, Stream::Init));
    let mut shuffle_rng = seeded(cfg.seed, Stream::Shuffle);
    let mut noise_rng = seeded(cfg.seed, Stream::Noise);
    let shapes = params.shapes();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let mut state = AdamState::new(params.named().iter().map(|(_, t)| t.len()));
    let bs = effective_batch(cfg.batch_size, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for rows in order.chunks(bs) {
            let clean = gather(train, rows);
            let noisy = corrupt(&clean, &cfg.noise, &mut noise_rng)?;
            let mut g = Graph::new();
            let x = g.input(noisy);
            let (_, x_hat) = params.nodes(&mut g, x, 0)?;
            let loss = g.mse(x_hat, &clean)?;
            let l = g.value(loss)?.item();
            check_finite(l, epoch)?;
            let grads = g.backward(loss)?.dense(&shape_refs);
            adam_step(&mut params.tensors_mut(), &grads, &mut state, &cfg.adam)?;
            total += l * rows.len() as f64;
        }
        let val_loss = val.map(|v| reconstruction_loss(&params, v)).transpose()?;
        let e = EpochLoss {
            epoch: epoch + 1,
            train_loss: total / n as f64,
            val_loss,
        };
        debug!("dae epoch {}: train {:.6} val {:?}", e.epoch, e.train_loss, e.val_loss);
        curve.push(e);
    }
    Ok(DaeTraining { params, curve })
}

fn check_labels(z: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> Result<()> {
    if z.nrows() != y.len() {
        return Err(NnError::LabelMismatch { labels: y.len(), rows: z.nrows() });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(NnError::BadConfig(format!("label {bad} with {n_classes} classes")));
    }
    Ok(())
}

fn evaluate(p: &ClassifierParams, z: ArrayView2<'_, f64>, y: &[usize]) -> Result<(f64, f64)> {
    let mut g = Graph::new();
    let zi = g.input(Tensor::from_array(z));
    let logits = p.nodes(&mut g, zi, 0)?;
    let loss = p.loss_node(&mut g, logits, y)?;
    let loss = g.value(loss)?.item();
    let pred = argmax_rows(p.predict_proba(z)?.view());
    let acc = pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    Ok((loss, acc))
}

/// Trains the classification head on frozen latent codes.
pub fn train_classifier(
    z_train: ArrayView2<'_, f64>,
    y_train: &[usize],
    val: Option<(ArrayView2<'_, f64>, &[usize])>,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<ClassifierTraining> {
    cfg.validate()?;
    check_labels(z_train, y_train, n_classes)?;
    if let Some((zv, yv)) = val {
        check_labels(zv, yv, n_classes)?;
        if zv.ncols() != z_train.ncols() {
            return Err(NnError::Shape(format!("validation codes have width {}, training {}", zv.ncols(), z_train.ncols())));
        }
    }
    let mut present = y_train.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(NnError::SingleClass);
    }
    let n = z_train.nrows();
    let arch = Architecture {
        latent_dim: z_train.ncols(),
        ..Architecture::new(1, n_classes, cfg)
    };
    arch.validate()?;
    let mut rng = seeded(cfg.seed, Stream::Classifier);
    let mut params = ClassifierParams::init(&arch, &mut rng);
    let shapes = params.shapes();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let mut state = AdamState::new(params.named().iter().map(|(_, t)| t.len()));
    let bs = effective_batch(cfg.batch_size, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for rows in order.chunks(bs) {
            let zb = gather(z_train, rows);
            let yb: Vec<usize> = rows.iter().map(|&r| y_train[r]).collect();
            let mut g = Graph::new();
            let zi = g.input(zb);
            let logits = params.nodes(&mut g, zi, 0)?;
            let loss = params.loss_node(&mut g, logits, &yb)?;
            let l = g.value(loss)?.item();
            check_finite(l, epoch)?;
            let grads = g.backward(loss)?.dense(&shape_refs);
            adam_step(&mut params.tensors_mut(), &grads, &mut state, &cfg.adam)?;
            total += l * rows.len() as f64;
        }
        let (_, train_accuracy) = evaluate(&params, z_train, y_train)?;
        let (val_loss, val_accuracy) = match val {
            Some((zv, yv)) if !yv.is_empty() => {
                let (l, a) = evaluate(&params, zv, yv)?;
                (Some(l), Some(a))
            }
            _ => (None, None),
        };
        curve.push(ClassifierEpoch {
            epoch: epoch + 1,
            train_loss: total / n as f64,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
    }
    Ok(ClassifierTraining { params, curve })
}

/// Encodes `x` with a trained autoencoder; convenience for callers that
/// hold a `DaeTraining`.
pub fn encode(p: &DaeParams, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    p.encode(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NoiseConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 16,
            model_dim: 8,
            heads: 2,
            latent_dim: 6,
            hidden_dim: 8,
            ..Default::default()
        }
    }

    fn low_rank(n: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let l = Array2::from_shape_fn((3, m), |_| rng.sample::<f64, _>(StandardNormal));
        let raw = f.dot(&l) + Array2::from_shape_fn((n, m), |_| 0.1 * rng.sample::<f64, _>(StandardNormal));
        let mut out = raw.clone();
        for (j, col) in raw.columns().into_iter().enumerate() {
            let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            for i in 0..n {
                out[[i, j]] = (raw[[i, j]] - lo) / (hi - lo);
            }
        }
        out
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let x = low_rank(20, 4, 0);
        let cfg = small_cfg(0);
        let t = train_dae(x.view(), None, &cfg).unwrap();
        assert!(t.curve.is_empty());
        let arch = Architecture::new(4, 2, &cfg);
        assert_eq!(t.params, DaeParams::init(&arch, &mut seeded(cfg.seed, Stream::Init)));
    }

    #[test]
    fn dae_training_reduces_loss_and_is_deterministic() {
        let x = low_rank(120, 10, 1);
        let cfg = small_cfg(8);
        let a = train_dae(x.view(), Some(x.slice(ndarray::s![..20, ..])), &cfg).unwrap();
        assert!(a.curve.last().unwrap().train_loss < a.curve[0].train_loss);
        assert!(a.curve.iter().all(|e| e.val_loss.unwrap().is_finite()));
        let b = train_dae(x.view(), Some(x.slice(ndarray::s![..20, ..])), &cfg).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn oversized_batch_falls_back_to_full_batch() {
        let x = low_rank(10, 3, 2);
        let cfg = TrainConfig {
            batch_size: 64,
            ..small_cfg(2)
        };
        assert_eq!(train_dae(x.view(), None, &cfg).unwrap().curve.len(), 2);
    }

    #[test]
    fn encoding_clean_and_noisy_inputs_differ() {
        let x = low_rank(30, 5, 3);
        let t = train_dae(x.view(), None, &small_cfg(3)).unwrap();
        let clean = t.params.encode(x.view()).unwrap();
        let noisy_t = corrupt(&Tensor::from_array(x.view()), &NoiseConfig::Gaussian { sigma: 0.5 }, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let noisy = t.params.encode(noisy_t.view2().unwrap()).unwrap();
        assert_eq!(clean.dim(), (30, 6));
        assert!(clean.iter().chain(noisy.iter()).all(|v| v.is_finite()));
        let diff: f64 = (&clean - &noisy).iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!(diff > 0.0);
    }

    #[test]
    fn classifier_errors() {
        let z = Array2::zeros((4, 2));
        let cfg = small_cfg(1);
        assert!(matches!(train_classifier(z.view(), &[0, 0, 0, 0], None, 2, &cfg), Err(NnError::SingleClass)));
        assert!(matches!(train_classifier(z.view(), &[0, 1, 0], None, 2, &cfg), Err(NnError::LabelMismatch { .. })));
    }

    #[test]
    fn multiclass_classifier_learns_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let centers = [(-3.0, 0.0), (3.0, 0.0), (0.0, 4.0)];
        let n = 150;
        let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let z = Array2::from_shape_fn((n, 2), |(r, c)| {
            let (cx, cy) = centers[y[r]];
            (if c == 0 { cx } else { cy }) + 0.5 * rng.sample::<f64, _>(StandardNormal)
        });
        let cfg = TrainConfig { epochs: 60, ..small_cfg(0) };
        let t = train_classifier(z.view(), &y, Some((z.view(), &y)), 3, &cfg).unwrap();
        let last = t.curve.last().unwrap();
        assert!(last.train_accuracy >= 0.95, "{last:?}");
        assert!(last.train_loss < t.curve[0].train_loss);
    }
}
