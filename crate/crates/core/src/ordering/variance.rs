use log::warn;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{OrderingError, Permutation, Result, SortDirection};
use crate::cluster::ClusteringResult;

/// Population variance of every feature within every sample cluster;
/// `per_cluster[c][i]` is `Var_c(X_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterVariances {
    pub per_cluster: Vec<Vec<f64>>,
}

pub(crate) fn population_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (mut lo, mut hi, mut n, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0usize, 0.0);
    for x in xs.clone() {
        lo = lo.min(x);
        hi = hi.max(x);
        n += 1;
        sum += x;
    }
    if n == 0 || lo == hi {
        return 0.0;
    }
    let mean = sum / n as f64;
    xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64
}

/// Sorts feature indices by a per-feature key; ties keep ascending index.
pub(crate) fn sort_by_key(keys: &[f64], direction: SortDirection) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| {
        let c = match direction {
            SortDirection::Ascending => keys[a].total_cmp(&keys[b]),
            SortDirection::Descending => keys[b].total_cmp(&keys[a]),
        };
        c.then(a.cmp(&b))
    });
    order
}

/// For each non-noise sample cluster, ranks all features by their variance
/// over that cluster's rows.
pub fn variance_local_order(
    values: ArrayView2<'_, f64>,
    clusters: &ClusteringResult,
    direction: SortDirection,
) -> Result<(Vec<Permutation>, ClusterVariances)> {
    if clusters.len() != values.nrows() {
        return Err(OrderingError::LabelMismatch {
            labels: clusters.len(),
            items: values.nrows(),
        });
    }
    let members = clusters.members();
    if members.iter().all(Vec::is_empty) {
        return Err(OrderingError::AllNoise);
    }
    let mut locals = Vec::with_capacity(members.len());
    let mut per_cluster = Vec::with_capacity(members.len());
    for (c, rows) in members.iter().enumerate() {
        if rows.len() == 1 {
            warn!("cluster {c} has a single sample; all its variances are zero");
        }
        let vars: Vec<f64> = (0..values.ncols())
            .map(|f| {
                let col = values.column(f);
                population_variance(rows.iter().map(move |&r| col[r]))
            })
            .collect();
        locals.push(Permutation::local(c, sort_by_key(&vars, direction)));
        per_cluster.push(vars);
    }
    Ok((locals, ClusterVariances { per_cluster }))
}
