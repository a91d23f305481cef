use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{OrderingError, Permutation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Weighted relationship graph over one cluster's features. Vertices are
/// feature indices of the full table; every edge has `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGraph {
    vertices: Vec<usize>,
    edges: Vec<Edge>,
}

impl FeatureGraph {
    pub fn new(mut vertices: Vec<usize>, edges: Vec<Edge>) -> Result<Self> {
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(OrderingError::BadGraph("duplicate vertex".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut norm = Vec::with_capacity(edges.len());
        for e in edges {
            let (i, j) = (e.i.min(e.j), e.i.max(e.j));
            if i == j {
                return Err(OrderingError::BadGraph(format!("self-loop on {i}")));
            }
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return Err(OrderingError::BadGraph(format!("weight {} on ({i}, {j})", e.weight)));
            }
            if vertices.binary_search(&i).is_err() || vertices.binary_search(&j).is_err() {
                return Err(OrderingError::BadGraph(format!("edge ({i}, {j}) leaves the vertex set")));
            }
            if !seen.insert((i, j)) {
                return Err(OrderingError::BadGraph(format!("duplicate edge ({i}, {j})")));
            }
            norm.push(Edge { i, j, weight: e.weight });
        }
        norm.sort_by_key(|e| (e.i, e.j));
        Ok(Self { vertices, edges: norm })
    }

    /// Graph with unit weights on the given vertex pairs.
    pub fn unweighted(vertices: Vec<usize>, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(vertices, pairs.iter().map(|&(i, j)| Edge { i, j, weight: 1.0 }).collect())
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub(crate) fn local_index(&self, feature: usize) -> usize {
        self.vertices.binary_search(&feature).expect("vertex of this graph")
    }

    /// Dense symmetric weight matrix over local vertex indices.
    pub(crate) fn weight_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut w = vec![vec![0.0; n]; n];
        for e in &self.edges {
            let (a, b) = (self.local_index(e.i), self.local_index(e.j));
            w[a][b] += e.weight;
            w[b][a] += e.weight;
        }
        w
    }

    /// Same graph with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.vertices.clone(),
            self.edges.iter().map(|e| Edge { weight: e.weight * factor, ..*e }).collect(),
        )
    }
}

fn arranged_cost(g: &FeatureGraph, p: &Permutation, unit: bool) -> Result<f64> {
    p.check_covers(g.vertices())?;
    let pos = p.positions();
    Ok(g.edges
        .iter()
        .map(|e| {
            let d = pos[&e.i].abs_diff(pos[&e.j]) as f64;
            if unit {
                d
            } else {
                e.weight * d
            }
        })
        .sum())
}

/// Feature dispersion: sum of `w_ij * |pos(i) - pos(j)|` over the edges.
pub fn dispersion_cost(g: &FeatureGraph, p: &Permutation) -> Result<f64> {
    arranged_cost(g, p, false)
}

/// Dispersion with every edge weight taken as 1.
pub fn local_cost_unit(g: &FeatureGraph, p: &Permutation) -> Result<f64> {
    arranged_cost(g, p, true)
}

/// Pearson correlation; `None` when either column is constant.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Connects member features whose absolute Pearson correlation over the
/// training rows reaches `threshold`; the weight is that absolute value.
pub fn build_feature_graph(values: ArrayView2<'_, f64>, members: &[usize], threshold: f64) -> Result<FeatureGraph> {
    if values.nrows() < 2 {
        return Err(OrderingError::TooFewSamples(values.nrows()));
    }
    if members.is_empty() {
        return Err(OrderingError::EmptyCluster);
    }
    if let Some(&bad) = members.iter().find(|&&f| f >= values.ncols()) {
        return Err(OrderingError::BadGraph(format!("feature {bad} out of range")));
    }
    let mut vertices = members.to_vec();
    vertices.sort_unstable();
    let cols: Vec<Vec<f64>> = vertices.iter().map(|&f| values.column(f).to_vec()).collect();
    let mut edges = Vec::new();
    for a in 0..vertices.len() {
        for b in (a + 1)..vertices.len() {
            if let Some(r) = pearson(&cols[a], &cols[b]) {
                if r.abs() >= threshold {
                    edges.push(Edge {
                        i: vertices[a],
                        j: vertices[b],
                        weight: r.abs(),
                    });
                }
            }
        }
    }
    FeatureGraph::new(vertices, edges)
}
