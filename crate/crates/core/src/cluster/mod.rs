//! Clustering of points (rows of a matrix) with k-means or DBSCAN.
//!
//! Both algorithms produce a [`ClusteringResult`]: one integer label per
//! item, `-1` for DBSCAN noise, plus the per-cluster weights `alpha_c`
//! (cluster size over the number of non-noise items).

mod dbscan;
mod kmeans;

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dbscan::{dbscan_fit, DbscanConfig};
pub use kmeans::{kmeans_fit, KMeansConfig, KMeansFit};

pub const NOISE: i32 = -1;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot cluster an empty point set")]
    Empty,
    #[error("num_clusters must be positive")]
    ZeroClusters,
    #[error("{k} clusters requested for {n} items")]
    TooManyClusters { k: usize, n: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("external labels: {0}")]
    BadLabels(String),
}

pub type Result<T, E = ClusterError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub labels: Vec<i32>,
    /// Number of non-noise clusters.
    pub k: usize,
    /// `alpha_c` for every cluster `0..k`.
    pub weights: Vec<f64>,
}

impl ClusteringResult {
    /// Builds the result from labels already in `0..k` (or `NOISE`).
    pub fn from_labels(labels: Vec<i32>, k: usize) -> Result<Self> {
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l == NOISE {
                continue;
            }
            let idx = usize::try_from(l)
                .ok()
                .filter(|&i| i < k)
                .ok_or_else(|| ClusterError::BadLabels(format!("label {l} outside [0, {k})")))?;
            sizes[idx] += 1;
        }
        let total: usize = sizes.iter().sum();
        let weights = if total == 0 {
            vec![0.0; k]
        } else {
            sizes.iter().map(|&s| s as f64 / total as f64).collect()
        };
        Ok(Self { labels, k, weights })
    }

    /// Relabels arbitrary integer ids to `0..k` in order of first
    /// appearance; any negative id is noise.
    pub fn from_external(raw: &[i64]) -> Result<Self> {
        let mut map = HashMap::new();
        let labels = raw
            .iter()
            .map(|&r| {
                if r < 0 {
                    NOISE
                } else {
                    let next = map.len() as i32;
                    *map.entry(r).or_insert(next)
                }
            })
            .collect();
        Self::from_labels(labels, map.len())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Item indices of each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                members[l as usize].push(i);
            }
        }
        members
    }
}

/// Reads an external-labels file: one integer per line, `-1` for noise.
/// Blank lines and lines starting with `#` are ignored.
pub fn read_labels<R: BufRead>(reader: R) -> Result<ClusteringResult> {
    let mut raw = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| ClusterError::BadLabels(e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: i64 = t
            .parse()
            .map_err(|_| ClusterError::BadLabels(format!("line {}: `{t}` is not an integer", no + 1)))?;
        raw.push(v);
    }
    if raw.is_empty() {
        return Err(ClusterError::Empty);
    }
    ClusteringResult::from_external(&raw)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
