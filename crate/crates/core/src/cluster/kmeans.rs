use log::debug;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sq_dist, ClusterError, ClusteringResult, Result};
use crate::rng::{seeded, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub num_clusters: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Independent k-means++ restarts; the lowest final inertia wins.
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            num_clusters: 3,
            max_iters: 100,
            tol: 1e-6,
            seed: 0,
            n_init: 10,
        }
    }
}

impl KMeansConfig {
    pub fn new(num_clusters: usize, seed: u64) -> Self {
        Self {
            num_clusters,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub result: ClusteringResult,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart, followed
    /// by the inertia at the final centroids.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans_fit(points: ArrayView2<'_, f64>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let n = points.nrows();
    if n == 0 || points.ncols() == 0 {
        return Err(ClusterError::Empty);
    }
    if cfg.num_clusters == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if cfg.num_clusters > n {
        return Err(ClusterError::TooManyClusters {
            k: cfg.num_clusters,
            n,
        });
    }
    let rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut rng = seeded(cfg.seed, Stream::Cluster);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..cfg.n_init.max(1) {
        let init = plus_plus_init(&rows, cfg.num_clusters, &mut rng);
        let fit = lloyd(&rows, init, cfg.max_iters, cfg.tol)?;
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    let best = best.expect("at least one restart");
    debug!("k-means k={} inertia={:.6} iters={}", cfg.num_clusters, best.inertia, best.iterations);
    Ok(best)
}

fn plus_plus_init(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centroids = vec![rows[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = rows[pick].clone();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Runs Lloyd iterations from the given centroids.
pub(crate) fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iters: usize, tol: f64) -> Result<KMeansFit> {
    let n = rows.len();
    let k = centroids.len();
    let dim = rows[0].len();
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters.max(1) {
        iterations += 1;
        for (i, r) in rows.iter().enumerate() {
            let (j, d) = nearest(r, &centroids);
            labels[i] = j;
            dists[i] = d;
        }
        repair_empty(&mut labels, &mut dists, &mut centroids, rows);
        history.push(dists.iter().sum());

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            let mean: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(sq_dist(&mean, &centroids[j]).sqrt());
            centroids[j] = mean;
        }
        if shift < tol {
            break;
        }
    }
    let inertia: f64 = rows.iter().zip(&labels).map(|(r, &l)| sq_dist(r, &centroids[l])).sum();
    history.push(inertia);
    let labels_i32 = labels.iter().map(|&l| l as i32).collect();
    let centroids = Array2::from_shape_vec((k, dim), centroids.into_iter().flatten().collect())
        .map_err(|e| ClusterError::BadConfig(e.to_string()))?;
    Ok(KMeansFit {
        result: ClusteringResult::from_labels(labels_i32, k)?,
        centroids,
        inertia,
        history,
        iterations,
    })
}

/// Moves the point farthest from its centroid into each empty cluster.
fn repair_empty(labels: &mut [usize], dists: &mut [f64], centroids: &mut [Vec<f64>], rows: &[Vec<f64>]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let far = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
        let Some(i) = far else { break };
        counts[labels[i]] -= 1;
        labels[i] = j;
        counts[j] = 1;
        dists[i] = 0.0;
        centroids[j] = rows[i].clone();
    }
}
