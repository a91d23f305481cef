use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{sigmoid_slice, softmax_rows, Graph, NodeId};
use super::tensor::Tensor;
use super::{NnError, Result, TrainConfig};

/// Layer sizes of the whole stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub n_features: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
}

impl Architecture {
    pub fn new(n_features: usize, n_classes: usize, cfg: &TrainConfig) -> Self {
        Self {
            n_features,
            model_dim: cfg.model_dim,
            heads: cfg.heads,
            latent_dim: cfg.latent_dim,
            hidden_dim: cfg.hidden_dim,
            n_classes,
        }
    }

    /// Width of the classifier output: a single logit for two classes.
    pub fn n_outputs(&self) -> usize {
        if self.n_classes == 2 {
            1
        } else {
            self.n_classes
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self;
        if a.n_features == 0 || a.model_dim == 0 || a.latent_dim == 0 || a.hidden_dim == 0 {
            return Err(NnError::BadConfig(format!("zero-sized layer in {a:?}")));
        }
        if a.heads == 0 || a.model_dim % a.heads != 0 {
            return Err(NnError::BadConfig(format!("{} heads do not divide model_dim {}", a.heads, a.model_dim)));
        }
        if a.n_classes < 2 {
            return Err(NnError::BadConfig(format!("need at least 2 classes, got {}", a.n_classes)));
        }
        Ok(())
    }
}

/// Access to the trainable tensors of a parameter block, in a fixed order.
pub trait ParamList {
    fn named(&self) -> Vec<(&'static str, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn shapes(&self) -> Vec<Vec<usize>> {
        self.named().iter().map(|(_, t)| t.shape().to_vec()).collect()
    }

    fn n_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

fn he_uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, fan_in: usize) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(vec![rows, cols], data).expect("sized")
}

/// Feature-token embedding plus multi-head attention projections. The
/// per-head matrices `W^Q_h` are the column blocks `h*d_k..(h+1)*d_k` of
/// `w_q` (likewise for K and V).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub heads: usize,
    /// `(m, model_dim)`: row `j` embeds feature `j`.
    pub w_in: Tensor,
    pub b_in: Tensor,
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    /// `(heads * d_k, model_dim)`.
    pub w_o: Tensor,
}

impl AttentionParams {
    pub fn init<R: Rng>(m: usize, model_dim: usize, heads: usize, rng: &mut R) -> Self {
        let d = model_dim;
        Self {
            heads,
            w_in: he_uniform(rng, m, d, 1),
            b_in: Tensor::zeros(&[d]),
            w_q: he_uniform(rng, d, d, d),
            w_k: he_uniform(rng, d, d, d),
            w_v: he_uniform(rng, d, d, d),
            w_o: he_uniform(rng, d, d, d),
        }
    }

    pub fn n_features(&self) -> usize {
        self.w_in.shape()[0]
    }

    pub fn model_dim(&self) -> usize {
        self.w_in.shape()[1]
    }

    /// Adds the block to `g` with parameter slots starting at `base`;
    /// returns the `(batch * m, model_dim)` attention output.
    pub fn nodes(&self, g: &mut Graph, x: NodeId, base: usize) -> Result<NodeId> {
        let m = self.n_features();
        let w_in = g.param(base, &self.w_in);
        let b_in = g.param(base + 1, &self.b_in);
        let w_q = g.param(base + 2, &self.w_q);
        let w_k = g.param(base + 3, &self.w_k);
        let w_v = g.param(base + 4, &self.w_v);
        let w_o = g.param(base + 5, &self.w_o);
        let tokens = g.feature_embed(x, w_in, b_in)?;
        let q = g.linear(tokens, w_q, None)?;
        let k = g.linear(tokens, w_k, None)?;
        let v = g.linear(tokens, w_v, None)?;
        let heads = g.attention(q, k, v, self.heads, m)?;
        g.linear(heads, w_o, None)
    }
}

impl ParamList for AttentionParams {
    fn named(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("attention.w_in", &self.w_in),
            ("attention.b_in", &self.b_in),
            ("attention.w_q", &self.w_q),
            ("attention.w_k", &self.w_k),
            ("attention.w_v", &self.w_v),
            ("attention.w_o", &self.w_o),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_in, &mut self.b_in, &mut self.w_q, &mut self.w_k, &mut self.w_v, &mut self.w_o]
    }
}

/// Attention block, encoder `Z = ReLU(mean_j(MHA(X)_j) W_e + b_e)` and
/// decoder `X_hat = sigmoid(Z W_d + b_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaeParams {
    pub attention: AttentionParams,
    pub w_e: Tensor,
    pub b_e: Tensor,
    pub w_d: Tensor,
    pub b_d: Tensor,
}

#[derive(Debug, Clone)]
pub struct DaeOutput {
    pub z: Tensor,
    pub x_hat: Tensor,
    pub loss: f64,
}

impl DaeParams {
    pub fn init<R: Rng>(arch: &Architecture, rng: &mut R) -> Self {
        let (m, d, l) = (arch.n_features, arch.model_dim, arch.latent_dim);
        Self {
            attention: AttentionParams::init(m, d, arch.heads, rng),
            w_e: he_uniform(rng, d, l, d),
            b_e: Tensor::zeros(&[l]),
            w_d: he_uniform(rng, l, m, l),
            b_d: Tensor::zeros(&[m]),
        }
    }

    pub fn n_features(&self) -> usize {
        self.attention.n_features()
    }

    pub fn latent_dim(&self) -> usize {
        self.b_e.len()
    }

    pub const N_TENSORS: usize = 10;

    /// Returns `(z, x_hat)` nodes; slots `base..base + N_TENSORS`.
    pub fn nodes(&self, g: &mut Graph, x: NodeId, base: usize) -> Result<(NodeId, NodeId)> {
        let z = self.encoder_nodes(g, x, base)?;
        let w_d = g.param(base + 8, &self.w_d);
        let b_d = g.param(base + 9, &self.b_d);
        let logits = g.linear(z, w_d, Some(b_d))?;
        Ok((z, g.sigmoid(logits)?))
    }

    fn encoder_nodes(&self, g: &mut Graph, x: NodeId, base: usize) -> Result<NodeId> {
        let (_, m) = g.value(x)?.dims2()?;
        if m != self.n_features() {
            return Err(NnError::Shape(format!("input has {m} features, model expects {}", self.n_features())));
        }
        let att = self.attention.nodes(g, x, base)?;
        let pooled = g.mean_tokens(att, m)?;
        let w_e = g.param(base + 6, &self.w_e);
        let b_e = g.param(base + 7, &self.b_e);
        let pre = g.linear(pooled, w_e, Some(b_e))?;
        g.relu(pre)
    }

    /// Rows per forward chunk so attention probabilities stay near 32 MB.
    fn chunk_rows(&self) -> usize {
        let m = self.n_features();
        (4_000_000 / (self.attention.heads * m * m).max(1)).clamp(1, 256)
    }

    /// Latent codes of clean inputs, `(n, latent_dim)`.
    pub fn encode(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let l = self.latent_dim();
        let mut out = Array2::zeros((x.nrows(), l));
        let step = self.chunk_rows();
        for start in (0..x.nrows()).step_by(step) {
            let end = (start + step).min(x.nrows());
            let mut g = Graph::new();
            let xi = g.input(Tensor::from_array(x.slice(ndarray::s![start..end, ..])));
            let z = self.encoder_nodes(&mut g, xi, 0)?;
            out.slice_mut(ndarray::s![start..end, ..]).assign(&g.value(z)?.view2()?);
        }
        Ok(out)
    }

    /// Reconstruction of `x_noisy` scored against `x_clean`.
    pub fn forward(&self, x_noisy: &Tensor, x_clean: &Tensor) -> Result<DaeOutput> {
        let mut g = Graph::new();
        let x = g.input(x_noisy.clone());
        let (z, x_hat) = self.nodes(&mut g, x, 0)?;
        let loss = g.mse(x_hat, x_clean)?;
        Ok(DaeOutput {
            z: g.value(z)?.clone(),
            x_hat: g.value(x_hat)?.clone(),
            loss: g.value(loss)?.item(),
        })
    }
}

impl ParamList for DaeParams {
    fn named(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = self.attention.named();
        v.extend([("dae.w_e", &self.w_e), ("dae.b_e", &self.b_e), ("dae.w_d", &self.w_d), ("dae.b_d", &self.b_d)]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.attention.tensors_mut();
        v.extend([&mut self.w_e, &mut self.b_e, &mut self.w_d, &mut self.b_d]);
        v
    }
}

/// `latent -> hidden (ReLU) -> outputs`; one sigmoid output for two
/// classes, softmax otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub n_classes: usize,
    pub w_h: Tensor,
    pub b_h: Tensor,
    pub w_out: Tensor,
    pub b_out: Tensor,
}

impl ClassifierParams {
    pub fn init<R: Rng>(arch: &Architecture, rng: &mut R) -> Self {
        let (l, h, c) = (arch.latent_dim, arch.hidden_dim, arch.n_outputs());
        Self {
            n_classes: arch.n_classes,
            w_h: he_uniform(rng, l, h, l),
            b_h: Tensor::zeros(&[h]),
            w_out: he_uniform(rng, h, c, h),
            b_out: Tensor::zeros(&[c]),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.n_classes == 2
    }

    pub const N_TENSORS: usize = 4;

    /// Returns the output logits; slots `base..base + N_TENSORS`.
    pub fn nodes(&self, g: &mut Graph, z: NodeId, base: usize) -> Result<NodeId> {
        let w_h = g.param(base, &self.w_h);
        let b_h = g.param(base + 1, &self.b_h);
        let w_out = g.param(base + 2, &self.w_out);
        let b_out = g.param(base + 3, &self.b_out);
        let h = g.linear(z, w_h, Some(b_h))?;
        let h = g.relu(h)?;
        g.linear(h, w_out, Some(b_out))
    }

    /// Adds the matching loss for `labels` on top of `logits`.
    pub fn loss_node(&self, g: &mut Graph, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        if self.is_binary() {
            let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { 0.0 }).collect();
            g.sigmoid_bce(logits, &y)
        } else {
            g.softmax_ce(logits, labels)
        }
    }

    /// Class probabilities, `(n, n_classes)`. For two classes the columns
    /// are `1 - p` and `p`.
    pub fn predict_proba(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut g = Graph::new();
        let zi = g.input(Tensor::from_array(z));
        let logits = self.nodes(&mut g, zi, 0)?;
        let lv = g.value(logits)?;
        let n = z.nrows();
        if self.is_binary() {
            let p = sigmoid_slice(lv.data());
            Ok(Array2::from_shape_fn((n, 2), |(r, c)| if c == 1 { p[r] } else { 1.0 - p[r] }))
        } else {
            let mut p = lv.view2()?.to_owned();
            softmax_rows(p.view_mut());
            Ok(p)
        }
    }
}

impl ParamList for ClassifierParams {
    fn named(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("classifier.w_h", &self.w_h),
            ("classifier.b_h", &self.b_h),
            ("classifier.w_out", &self.w_out),
            ("classifier.b_out", &self.b_out),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_h, &mut self.b_h, &mut self.w_out, &mut self.b_out]
    }
}

/// Output of the attention block for a `(batch, m)` input, shaped
/// `[batch, m, model_dim]`.
pub fn mha_forward(x: &Tensor, p: &AttentionParams) -> Result<Tensor> {
    let (n, m) = x.dims2()?;
    if m != p.n_features() {
        return Err(NnError::Shape(format!("input has {m} features, attention expects {}", p.n_features())));
    }
    let mut g = Graph::new();
    let xi = g.input(x.clone());
    let out = p.nodes(&mut g, xi, 0)?;
    g.value(out)?.clone().reshaped(vec![n, m, p.model_dim()])
}

/// Index of the largest probability in every row.
pub fn argmax_rows(p: ArrayView2<'_, f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (i, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Trained encoder plus classifier head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabSeqModel {
    pub dae: DaeParams,
    pub classifier: ClassifierParams,
}

impl TabSeqModel {
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let z = self.dae.encode(x)?;
        self.classifier.predict_proba(z.view())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.predict_proba(x)?.view()))
    }
}
