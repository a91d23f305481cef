//! Reverse-mode differentiation over an eagerly evaluated tape.
//!
//! Every operation computes its value when it is added to the [`Graph`];
//! [`Graph::backward`] then walks the tape in reverse. Nodes are created in
//! topological order by construction, so no sorting is needed.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{s, ArrayView2, ArrayViewMut2};

use super::tensor::{gemm, Tensor};
use super::{NnError, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside
/// cross-entropy losses.
pub const PROB_CLAMP: f64 = 1e-7;

static NEXT_GRAPH: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId {
    graph: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    Linear { x: NodeId, w: NodeId, b: Option<NodeId> },
    FeatureEmbed { x: NodeId, w: NodeId, b: NodeId },
    Attention { q: NodeId, k: NodeId, v: NodeId, heads: usize, tokens: usize, probs: Vec<f64> },
    Reshape { x: NodeId },
    MeanTokens { x: NodeId, tokens: usize },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sum { x: NodeId },
    Mse { pred: NodeId, target: Tensor },
    SigmoidBce { logits: NodeId, targets: Vec<f64> },
    SoftmaxCe { logits: NodeId, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients of a scalar with respect to every parameter slot that took
/// part in the forward pass.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, param: usize) -> Option<&Tensor> {
        self.by_param.get(param).and_then(Option::as_ref)
    }

    /// One gradient per shape; parameters the loss never touched get zeros.
    pub fn dense(mut self, shapes: &[&[usize]]) -> Vec<Tensor> {
        self.by_param.resize(shapes.len(), None);
        self.by_param
            .into_iter()
            .zip(shapes)
            .map(|(g, s)| g.unwrap_or_else(|| Tensor::zeros(s)))
            .collect()
    }
}

#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn sigmoid_slice(zs: &[f64]) -> Vec<f64> {
    zs.iter().map(|&z| sigmoid(z)).collect()
}

/// In-place numerically guarded softmax over each row.
pub(crate) fn softmax_rows(mut m: ArrayViewMut2<'_, f64>) {
    for mut row in m.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn softmax_matrix(logits: &Tensor) -> Result<Tensor> {
    let mut p = logits.clone();
    softmax_rows(p.view2_mut()?);
    Ok(p)
}

fn mismatch(what: &str, a: &[usize], b: &[usize]) -> NnError {
    NnError::Shape(format!("{what}: {a:?} vs {b:?}"))
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, requires_grad });
        NodeId {
            graph: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        if id.graph != self.id {
            return Err(NnError::NotRecorded);
        }
        self.nodes.get(id.index).ok_or(NnError::NotRecorded)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i.index].requires_grad)
    }

    pub fn value(&self, id: NodeId) -> Result<&Tensor> {
        Ok(&self.node(id)?.value)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Input, false)
    }

    /// Trainable leaf bound to parameter slot `slot`.
    pub fn param(&mut self, slot: usize, t: &Tensor) -> NodeId {
        self.push(t.clone(), Op::Param(slot), true)
    }

    /// `x (n, in) * w (in, out) + b (out)`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let (n, din) = self.node(x)?.value.dims2()?;
        let (win, dout) = self.node(w)?.value.dims2()?;
        if din != win {
            return Err(mismatch("linear input vs weight", &[n, din], &[win, dout]));
        }
        let mut out = Tensor::zeros(&[n, dout]);
        if let Some(b) = b {
            let bv = &self.node(b)?.value;
            if bv.len() != dout {
                return Err(mismatch("linear bias", bv.shape(), &[dout]));
            }
            for row in out.data_mut().chunks_mut(dout) {
                row.copy_from_slice(bv.data());
            }
        }
        {
            let beta = if b.is_some() { 1.0 } else { 0.0 };
            let xv = self.nodes[x.index].value.view2()?;
            let wv = self.nodes[w.index].value.view2()?;
            gemm(1.0, xv, false, wv, false, beta, &mut out.view2_mut()?);
        }
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        Ok(self.push(out, Op::Linear { x, w, b }, rg))
    }

    /// Embeds every scalar feature as a token: row `r * m + j` of the
    /// output is `x[r, j] * w[j, :] + b`.
    pub fn feature_embed(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, m) = self.node(x)?.value.dims2()?;
        let (wm, d) = self.node(w)?.value.dims2()?;
        let bv = &self.node(b)?.value;
        if wm != m || bv.len() != d {
            return Err(mismatch("feature embedding", &[n, m], &[wm, d, bv.len()]));
        }
        let (xv, wv, bv) = (self.nodes[x.index].value.data(), self.nodes[w.index].value.data(), bv.data());
        let mut out = vec![0.0; n * m * d];
        for r in 0..n {
            for j in 0..m {
                let xi = xv[r * m + j];
                let dst = &mut out[(r * m + j) * d..(r * m + j + 1) * d];
                for ((o, &wk), &bk) in dst.iter_mut().zip(&wv[j * d..(j + 1) * d]).zip(bv) {
                    *o = xi * wk + bk;
                }
            }
        }
        let rg = self.rg(&[x, w, b]);
        Ok(self.push(Tensor::new(vec![n * m, d], out)?, Op::FeatureEmbed { x, w, b }, rg))
    }

    /// Multi-head scaled dot-product attention. `q`, `k`, `v` are
    /// `(batch * tokens, d)`; head `h` owns columns `h*d/heads..(h+1)*d/heads`
    /// and attends within each group of `tokens` consecutive rows. The
    /// result is the concatenation of the heads, before any output projection.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize, tokens: usize) -> Result<NodeId> {
        let (n, d) = self.node(q)?.value.dims2()?;
        for other in [k, v] {
            let s = self.node(other)?.value.shape();
            if s != [n, d] {
                return Err(mismatch("attention q vs k/v", &[n, d], s));
            }
        }
        if heads == 0 || d % heads != 0 || tokens == 0 || n % tokens != 0 {
            return Err(NnError::Shape(format!("{heads} heads over width {d}, {tokens} tokens over {n} rows")));
        }
        let (dk, batch) = (d / heads, n / tokens);
        let scale = 1.0 / (dk as f64).sqrt();
        let qv = self.nodes[q.index].value.view2()?;
        let kv = self.nodes[k.index].value.view2()?;
        let vv = self.nodes[v.index].value.view2()?;
        let mut out = Tensor::zeros(&[n, d]);
        let mut probs = vec![0.0; batch * heads * tokens * tokens];
        {
            let mut ov = out.view2_mut()?;
            for b in 0..batch {
                let rows = b * tokens..(b + 1) * tokens;
                for h in 0..heads {
                    let cols = h * dk..(h + 1) * dk;
                    let off = (b * heads + h) * tokens * tokens;
                    let mut p = ArrayViewMut2::from_shape((tokens, tokens), &mut probs[off..off + tokens * tokens]).expect("sized above");
                    gemm(
                        scale,
                        qv.slice(s![rows.clone(), cols.clone()]),
                        false,
                        kv.slice(s![rows.clone(), cols.clone()]),
                        true,
                        0.0,
                        &mut p,
                    );
                    softmax_rows(p.view_mut());
                    gemm(
                        1.0,
                        p.view(),
                        false,
                        vv.slice(s![rows.clone(), cols.clone()]),
                        false,
                        0.0,
                        &mut ov.slice_mut(s![rows.clone(), cols]),
                    );
                }
            }
        }
        let rg = self.rg(&[q, k, v]);
        Ok(self.push(out, Op::Attention { q, k, v, heads, tokens, probs }, rg))
    }

    /// Attention probabilities of the last call, laid out
    /// `[batch][head][query][key]`.
    pub fn attention_probs(&self, id: NodeId) -> Result<&[f64]> {
        match &self.node(id)?.op {
            Op::Attention { probs, .. } => Ok(probs),
            _ => Err(NnError::Shape("node is not an attention op".into())),
        }
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        let v = self.node(x)?.value.clone().reshaped(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Reshape { x }, rg))
    }

    /// Averages each group of `tokens` consecutive rows: `(batch * tokens, d)`
    /// becomes `(batch, d)`.
    pub fn mean_tokens(&mut self, x: NodeId, tokens: usize) -> Result<NodeId> {
        let (n, d) = self.node(x)?.value.dims2()?;
        if tokens == 0 || n % tokens != 0 {
            return Err(NnError::Shape(format!("{n} rows are not groups of {tokens} tokens")));
        }
        let xv = self.nodes[x.index].value.data();
        let mut out = vec![0.0; n / tokens * d];
        for (r, row) in xv.chunks(d).enumerate() {
            let dst = &mut out[(r / tokens) * d..(r / tokens + 1) * d];
            for (o, v) in dst.iter_mut().zip(row) {
                *o += v;
            }
        }
        let inv = 1.0 / tokens as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(vec![n / tokens, d], out)?, Op::MeanTokens { x, tokens }, rg))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = &self.node(x)?.value;
        let v = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|&z| z.max(0.0)).collect())?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Relu { x }, rg))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = &self.node(x)?.value;
        let v = Tensor::new(xv.shape().to_vec(), sigmoid_slice(xv.data()))?;
        let rg = self.rg(&[x]);
        Ok(self.push(v, Op::Sigmoid { x }, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (&self.node(a)?.value, &self.node(b)?.value);
        if av.shape() != bv.shape() {
            return Err(mismatch("add", av.shape(), bv.shape()));
        }
        let mut v = av.clone();
        v.add_assign(bv);
        let rg = self.rg(&[a, b]);
        Ok(self.push(v, Op::Add { a, b }, rg))
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.node(x)?.value.data().iter().sum();
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::scalar(v), Op::Sum { x }, rg))
    }

    /// Mean squared error over all elements.
    pub fn mse(&mut self, pred: NodeId, target: &Tensor) -> Result<NodeId> {
        let pv = &self.node(pred)?.value;
        if pv.len() != target.len() || pv.is_empty() {
            return Err(mismatch("mse", pv.shape(), target.shape()));
        }
        let loss = pv.data().iter().zip(target.data()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pv.len() as f64;
        let rg = self.rg(&[pred]);
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target: target.clone() }, rg))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against 0/1 targets.
    pub fn sigmoid_bce(&mut self, logits: NodeId, targets: &[f64]) -> Result<NodeId> {
        let lv = &self.node(logits)?.value;
        if lv.len() != targets.len() || targets.is_empty() {
            return Err(mismatch("binary cross-entropy", lv.shape(), &[targets.len()]));
        }
        let loss = lv
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &y)| {
                let p = sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / targets.len() as f64;
        let rg = self.rg(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::SigmoidBce { logits, targets: targets.to_vec() }, rg))
    }

    /// Mean categorical cross-entropy of `softmax(logits)` rows.
    pub fn softmax_ce(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let lv = &self.node(logits)?.value;
        let (n, c) = lv.dims2()?;
        if n != labels.len() || n == 0 {
            return Err(mismatch("cross-entropy", &[n, c], &[labels.len()]));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(NnError::Shape(format!("label {bad} with {c} outputs")));
        }
        let p = softmax_matrix(lv)?;
        let loss = labels
            .iter()
            .enumerate()
            .map(|(r, &y)| -p.data()[r * c + y].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln())
            .sum::<f64>()
            / n as f64;
        let rg = self.rg(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCe { logits, labels: labels.to_vec() }, rg))
    }

    /// Gradients of the scalar node `loss` with respect to every parameter.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let root = self.node(loss)?;
        if !root.value.is_scalar() {
            return Err(NnError::NotScalar(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.index + 1];
        grads[loss.index] = Some(Tensor::full(root.value.shape(), 1.0));
        let mut out = Gradients::default();
        for i in (0..=loss.index).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, g, &mut grads, &mut out)?;
        }
        Ok(out)
    }

    fn propagate(&self, node: &Node, g: Tensor, grads: &mut [Option<Tensor>], out: &mut Gradients) -> Result<()> {
        let mut acc = |id: NodeId, t: Tensor| {
            if !self.nodes[id.index].requires_grad {
                return;
            }
            match &mut grads[id.index] {
                Some(existing) => existing.add_assign(&t),
                slot => *slot = Some(t),
            }
        };
        let val = |id: NodeId| &self.nodes[id.index].value;
        match &node.op {
            Op::Input => {}
            Op::Param(slot) => {
                if out.by_param.len() <= *slot {
                    out.by_param.resize(*slot + 1, None);
                }
                match &mut out.by_param[*slot] {
                    Some(existing) => existing.add_assign(&g),
                    s => *s = Some(g),
                }
            }
            Op::Linear { x, w, b } => {
                let gv = g.view2()?;
                if self.nodes[x.index].requires_grad {
                    let mut dx = Tensor::zeros(val(*x).shape());
                    gemm(1.0, gv, false, val(*w).view2()?, true, 0.0, &mut dx.view2_mut()?);
                    acc(*x, dx);
                }
                if self.nodes[w.index].requires_grad {
                    let mut dw = Tensor::zeros(val(*w).shape());
                    gemm(1.0, val(*x).view2()?, true, gv, false, 0.0, &mut dw.view2_mut()?);
                    acc(*w, dw);
                }
                if let Some(b) = b {
                    let db: Vec<f64> = gv.sum_axis(ndarray::Axis(0)).to_vec();
                    acc(*b, Tensor::new(val(*b).shape().to_vec(), db)?);
                }
            }
            Op::FeatureEmbed { x, w, b } => {
                let (n, m) = val(*x).dims2()?;
                let d = val(*b).len();
                let (xv, wv, gd) = (val(*x).data(), val(*w).data(), g.data());
                let mut dx = vec![0.0; n * m];
                let mut dw = vec![0.0; m * d];
                let mut db = vec![0.0; d];
                for r in 0..n {
                    for j in 0..m {
                        let gt = &gd[(r * m + j) * d..(r * m + j + 1) * d];
                        let wj = &wv[j * d..(j + 1) * d];
                        let xi = xv[r * m + j];
                        let mut dot = 0.0;
                        for k in 0..d {
                            dot += gt[k] * wj[k];
                            dw[j * d + k] += xi * gt[k];
                            db[k] += gt[k];
                        }
                        dx[r * m + j] = dot;
                    }
                }
                acc(*x, Tensor::new(vec![n, m], dx)?);
                acc(*w, Tensor::new(val(*w).shape().to_vec(), dw)?);
                acc(*b, Tensor::new(val(*b).shape().to_vec(), db)?);
            }
            Op::Attention { q, k, v, heads, tokens, probs } => {
                let (n, d) = val(*q).dims2()?;
                let (heads, tokens) = (*heads, *tokens);
                let dk = d / heads;
                let scale = 1.0 / (dk as f64).sqrt();
                let (qv, kv, vv, gv) = (val(*q).view2()?, val(*k).view2()?, val(*v).view2()?, g.view2()?);
                let mut dq = Tensor::zeros(&[n, d]);
                let mut dkt = Tensor::zeros(&[n, d]);
                let mut dv = Tensor::zeros(&[n, d]);
                let mut ds = ndarray::Array2::<f64>::zeros((tokens, tokens));
                {
                    let (mut dqv, mut dkv, mut dvv) = (dq.view2_mut()?, dkt.view2_mut()?, dv.view2_mut()?);
                    for b in 0..n / tokens {
                        let rows = b * tokens..(b + 1) * tokens;
                        for h in 0..heads {
                            let cols = h * dk..(h + 1) * dk;
                            let off = (b * heads + h) * tokens * tokens;
                            let p = ArrayView2::from_shape((tokens, tokens), &probs[off..off + tokens * tokens]).expect("sized in forward");
                            let go = gv.slice(s![rows.clone(), cols.clone()]);
                            // dP = dO V^T, then the softmax Jacobian.
                            gemm(1.0, go, false, vv.slice(s![rows.clone(), cols.clone()]), true, 0.0, &mut ds.view_mut());
                            for (mut drow, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                                let dot: f64 = drow.iter().zip(prow.iter()).map(|(a, b)| a * b).sum();
                                for (dv_, &pv) in drow.iter_mut().zip(prow.iter()) {
                                    *dv_ = pv * (*dv_ - dot);
                                }
                            }
                            gemm(1.0, p, true, go, false, 0.0, &mut dvv.slice_mut(s![rows.clone(), cols.clone()]));
                            gemm(
                                scale,
                                ds.view(),
                                false,
                                kv.slice(s![rows.clone(), cols.clone()]),
                                false,
                                0.0,
                                &mut dqv.slice_mut(s![rows.clone(), cols.clone()]),
                            );
                            gemm(
                                scale,
                                ds.view(),
                                true,
                                qv.slice(s![rows.clone(), cols.clone()]),
                                false,
                                0.0,
                                &mut dkv.slice_mut(s![rows.clone(), cols]),
                            );
                        }
                    }
                }
                acc(*q, dq);
                acc(*k, dkt);
                acc(*v, dv);
            }
            Op::Reshape { x } => acc(*x, g.reshaped(val(*x).shape().to_vec())?),
            Op::MeanTokens { x, tokens } => {
                let (n, d) = val(*x).dims2()?;
                let inv = 1.0 / *tokens as f64;
                let mut dx = vec![0.0; n * d];
                for (r, row) in dx.chunks_mut(d).enumerate() {
                    for (o, gv) in row.iter_mut().zip(&g.data()[(r / tokens) * d..(r / tokens + 1) * d]) {
                        *o = gv * inv;
                    }
                }
                acc(*x, Tensor::new(vec![n, d], dx)?);
            }
            Op::Relu { x } => {
                let d = val(*x).data().iter().zip(g.data()).map(|(&z, &gz)| if z > 0.0 { gz } else { 0.0 }).collect();
                acc(*x, Tensor::new(val(*x).shape().to_vec(), d)?);
            }
            Op::Sigmoid { x } => {
                let d = node.value.data().iter().zip(g.data()).map(|(&s, &gz)| gz * s * (1.0 - s)).collect();
                acc(*x, Tensor::new(val(*x).shape().to_vec(), d)?);
            }
            Op::Add { a, b } => {
                acc(*a, g.clone());
                acc(*b, g);
            }
            Op::Sum { x } => acc(*x, Tensor::full(val(*x).shape(), g.item())),
            Op::Mse { pred, target } => {
                let pv = val(*pred);
                let c = 2.0 * g.item() / pv.len() as f64;
                let d = pv.data().iter().zip(target.data()).map(|(p, t)| c * (p - t)).collect();
                acc(*pred, Tensor::new(pv.shape().to_vec(), d)?);
            }
            Op::SigmoidBce { logits, targets } => {
                let lv = val(*logits);
                let c = g.item() / targets.len() as f64;
                let d = lv.data().iter().zip(targets).map(|(&z, &y)| c * (sigmoid(z) - y)).collect();
                acc(*logits, Tensor::new(lv.shape().to_vec(), d)?);
            }
            Op::SoftmaxCe { logits, labels } => {
                let lv = val(*logits);
                let (n, cdim) = lv.dims2()?;
                let mut p = softmax_matrix(lv)?;
                let c = g.item() / n as f64;
                for (r, &y) in labels.iter().enumerate() {
                    p.data_mut()[r * cdim + y] -= 1.0;
                }
                p.data_mut().iter_mut().for_each(|v| *v *= c);
                acc(*logits, p);
            }
        }
        Ok(())
    }
}
