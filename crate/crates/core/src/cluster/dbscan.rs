use std::collections::VecDeque;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{sq_dist, ClusterError, ClusteringResult, Result, NOISE};

/// DBSCAN parameters. `min_pts` counts the query point itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_pts: usize,
}

const UNVISITED: i32 = -2;

/// Density-based clustering with the Euclidean metric. Clusters are
/// numbered in the order their first core point is met while scanning the
/// input; border points join the first cluster that reaches them.
pub fn dbscan_fit(points: ArrayView2<'_, f64>, cfg: &DbscanConfig) -> Result<ClusteringResult> {
    if !(cfg.eps > 0.0) || !cfg.eps.is_finite() {
        return Err(ClusterError::BadConfig(format!("eps must be positive, got {}", cfg.eps)));
    }
    if cfg.min_pts == 0 {
        return Err(ClusterError::BadConfig("min_pts must be positive".into()));
    }
    let n = points.nrows();
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    let rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();
    let eps2 = cfg.eps * cfg.eps;
    let region = |i: usize| -> Vec<usize> { (0..n).filter(|&j| sq_dist(&rows[i], &rows[j]) <= eps2).collect() };

    let mut labels = vec![UNVISITED; n];
    let mut next = 0i32;
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let seeds = region(i);
        if seeds.len() < cfg.min_pts {
            labels[i] = NOISE;
            continue;
        }
        let c = next;
        next += 1;
        labels[i] = c;
        let mut queue: VecDeque<usize> = seeds.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            if labels[j] == NOISE {
                labels[j] = c;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = c;
            let nb = region(j);
            if nb.len() >= cfg.min_pts {
                queue.extend(nb);
            }
        }
    }
    ClusteringResult::from_labels(labels, next as usize)
}
