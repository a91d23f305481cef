//! Feature ordering.
//!
//! Two modes are available:
//!
//! * `variance`: the training rows are clustered, every cluster ranks all
//!   features by their within-cluster variance, and the rankings are merged
//!   by a Borda count weighted with the cluster weights `alpha_c`.
//! * `graph`: the features themselves are clustered, each cluster becomes a
//!   correlation graph whose vertices are laid out by minimum linear
//!   arrangement, and the cluster blocks are concatenated. The recorded
//!   global cost is `F_G = sum_c alpha_c * D(pi_c)`.
//!
//! Only the training split is ever looked at.

mod combine;
mod file;
mod graph;
mod minla;
mod permutation;
mod variance;

use log::info;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{dbscan_fit, kmeans_fit, ClusterError, ClusteringResult, DbscanConfig, KMeansConfig};
use crate::data::Dataset;

pub use combine::{
    borda_scores, global_combine, global_dispersion, induced_order, weighted_footrule, CombineMode,
};
pub use file::{read_permutation_file, write_permutation_file, FeatureEntry, PermutationFile};
pub use graph::{build_feature_graph, dispersion_cost, local_cost_unit, Edge, FeatureGraph};
pub use minla::{minla_auto, minla_exact, minla_heuristic, MAX_EXACT_VERTICES};
pub use permutation::{Permutation, Scope};
pub use variance::{variance_local_order, ClusterVariances};

#[derive(Debug, Error)]
pub enum OrderingError {
    #[error("not a bijection: {0}")]
    NotBijective(String),
    #[error("permutation does not match graph vertices: {0}")]
    VertexMismatch(String),
    #[error("invalid feature graph: {0}")]
    BadGraph(String),
    #[error("exact arrangement supports at most {max} vertices, got {n}")]
    TooLargeForExact { n: usize, max: usize },
    #[error("need at least 2 samples to correlate features, got {0}")]
    TooFewSamples(usize),
    #[error("cluster has no members")]
    EmptyCluster,
    #[error("every clustered item is noise")]
    AllNoise,
    #[error("{orders} local orders but {weights} weights")]
    WeightMismatch { orders: usize, weights: usize },
    #[error("{labels} cluster labels for {items} items")]
    LabelMismatch { labels: usize, items: usize },
    #[error("invalid ordering config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("permutation file: {0}")]
    File(String),
}

pub type Result<T, E = OrderingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderingMode {
    #[default]
    Variance,
    Graph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterTarget {
    Samples,
    Features,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortDirection {
    #[default]
    #[serde(alias = "asc")]
    Ascending,
    #[serde(alias = "desc")]
    Descending,
}

impl SortDirection {
    pub fn short(self) -> &'static str {
        match self {
            SortDirection::Ascending => "asc",
            SortDirection::Descending => "desc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMetric {
    #[default]
    AbsPearson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderingConfig {
    pub mode: OrderingMode,
    /// What gets clustered; derived from `mode` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_target: Option<ClusterTarget>,
    pub direction: SortDirection,
    /// Minimum |correlation| for a graph edge (graph mode).
    pub edge_threshold: f64,
    pub weight_metric: WeightMetric,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        Self {
            mode: OrderingMode::Variance,
            cluster_target: None,
            direction: SortDirection::Ascending,
            edge_threshold: 0.3,
            weight_metric: WeightMetric::AbsPearson,
        }
    }
}

impl OrderingConfig {
    pub fn variance(direction: SortDirection) -> Self {
        Self {
            direction,
            ..Default::default()
        }
    }

    pub fn graph(edge_threshold: f64) -> Self {
        Self {
            mode: OrderingMode::Graph,
            edge_threshold,
            ..Default::default()
        }
    }

    pub fn target(&self) -> ClusterTarget {
        self.cluster_target.unwrap_or(match self.mode {
            OrderingMode::Variance => ClusterTarget::Samples,
            OrderingMode::Graph => ClusterTarget::Features,
        })
    }

    pub fn validate(&self) -> Result<()> {
        match (self.mode, self.target()) {
            (OrderingMode::Variance, ClusterTarget::Samples) | (OrderingMode::Graph, ClusterTarget::Features) => {}
            (mode, target) => {
                return Err(OrderingError::BadConfig(format!("mode {mode:?} cannot cluster {target:?}")));
            }
        }
        if !(0.0..=1.0).contains(&self.edge_threshold) {
            return Err(OrderingError::BadConfig(format!("edge_threshold {} outside [0, 1]", self.edge_threshold)));
        }
        Ok(())
    }
}

/// Clustering algorithm used by the ordering step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum ClusterMethod {
    Kmeans(KMeansConfig),
    Dbscan(DbscanConfig),
    /// Labels produced elsewhere, one per clustered item.
    External(ClusteringResult),
}

impl ClusterMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterMethod::Kmeans(_) => "kmeans",
            ClusterMethod::Dbscan(_) => "dbscan",
            ClusterMethod::External(_) => "external",
        }
    }

    pub fn fit(&self, points: ArrayView2<'_, f64>) -> Result<ClusteringResult> {
        let r = match self {
            ClusterMethod::Kmeans(cfg) => kmeans_fit(points, cfg)?.result,
            ClusterMethod::Dbscan(cfg) => dbscan_fit(points, cfg)?,
            ClusterMethod::External(r) => r.clone(),
        };
        if r.len() != points.nrows() {
            return Err(OrderingError::LabelMismatch {
                labels: r.len(),
                items: points.nrows(),
            });
        }
        Ok(r)
    }
}

/// Everything produced while ordering one training split.
#[derive(Debug, Clone)]
pub struct OrderingOutcome {
    /// Global permutation; its cost is the mode's global objective.
    pub permutation: Permutation,
    pub clustering: ClusteringResult,
    pub locals: Vec<Permutation>,
    /// Variance mode only.
    pub variances: Option<ClusterVariances>,
    /// Graph mode only, one per cluster.
    pub graphs: Vec<FeatureGraph>,
}

/// Cluster, order locally and combine, on the training split only.
pub fn order_features(train: &Dataset, cfg: &OrderingConfig, method: &ClusterMethod) -> Result<OrderingOutcome> {
    cfg.validate()?;
    if train.n_samples() == 0 || train.n_features() == 0 {
        return Err(OrderingError::BadConfig("empty training set".into()));
    }
    let m = train.n_features();
    let values = train.values.view();
    let outcome = match cfg.mode {
        OrderingMode::Variance => {
            let clustering = method.fit(values)?;
            let (locals, variances) = variance_local_order(values, &clustering, cfg.direction)?;
            let permutation = global_combine(&locals, &clustering.weights, CombineMode::Borda, m)?;
            OrderingOutcome {
                permutation,
                clustering,
                locals,
                variances: Some(variances),
                graphs: Vec::new(),
            }
        }
        OrderingMode::Graph => {
            let features = values.t();
            let clustering = method.fit(features)?;
            if clustering.k == 0 {
                return Err(OrderingError::AllNoise);
            }
            let mut graphs = Vec::with_capacity(clustering.k);
            let mut locals = Vec::with_capacity(clustering.k);
            for (c, members) in clustering.members().iter().enumerate() {
                let g = build_feature_graph(values, members, cfg.edge_threshold)?;
                let local = minla_auto(&g)?;
                let cost = local.cost().unwrap_or(0.0);
                locals.push(Permutation::local(c, local.into_order()).with_cost(cost));
                graphs.push(g);
            }
            let mut permutation = global_combine(&locals, &clustering.weights, CombineMode::Blocks, m)?;
            if cfg.direction == SortDirection::Descending {
                let cost = permutation.cost();
                permutation = permutation.reversed();
                if let Some(c) = cost {
                    permutation = permutation.with_cost(c);
                }
            }
            OrderingOutcome {
                permutation,
                clustering,
                locals,
                variances: None,
                graphs,
            }
        }
    };
    info!(
        "ordered {m} features ({:?}, {} clusters, cost {:?})",
        cfg.mode,
        outcome.clustering.k,
        outcome.permutation.cost()
    );
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(n: usize, m: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Array2::from_shape_fn((n, 3), |_| rng.gen::<f64>());
        let values = Array2::from_shape_fn((n, m), |(r, c)| base[[r, c % 3]] * (1.0 + c as f64 * 0.1) + 0.3 * rng.gen::<f64>());
        Dataset::new(
            values,
            (0..m).map(|i| format!("f{i}")).collect(),
            (0..n).map(|i| i % 2).collect(),
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(OrderingConfig::default().validate().is_ok());
        let bad = OrderingConfig {
            cluster_target: Some(ClusterTarget::Features),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(OrderingConfig::graph(1.5).validate().is_err());
    }

    #[test]
    fn single_cluster_is_global_variance_sort() {
        let d = random_dataset(40, 7, 1);
        let out = order_features(&d, &OrderingConfig::default(), &ClusterMethod::Kmeans(KMeansConfig::new(1, 0))).unwrap();
        let vars: Vec<f64> = (0..7).map(|f| variance::population_variance(d.values.column(f).iter().copied())).collect();
        let expect = variance::sort_by_key(&vars, SortDirection::Ascending);
        assert_eq!(out.permutation.order(), &expect[..]);
    }

    #[test]
    fn graph_mode_beats_random_arrangements() {
        let d = random_dataset(60, 8, 2);
        let cfg = OrderingConfig::graph(0.2);
        let out = order_features(&d, &cfg, &ClusterMethod::Kmeans(KMeansConfig::new(2, 3))).unwrap();
        out.permutation.check_bijective(8).unwrap();
        let fg = global_dispersion(&out.permutation, &out.graphs, &out.clustering.weights).unwrap();
        assert!((fg - out.permutation.cost().unwrap()).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let mut order: Vec<usize> = (0..8).collect();
            rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
            let other = global_dispersion(&Permutation::global(order), &out.graphs, &out.clustering.weights).unwrap();
            assert!(fg <= other + 1e-9);
        }
    }

    #[test]
    fn external_labels_must_match_row_count() {
        let d = random_dataset(10, 3, 0);
        let ext = ClusterMethod::External(ClusteringResult::from_labels(vec![0; 9], 1).unwrap());
        assert!(matches!(order_features(&d, &OrderingConfig::default(), &ext), Err(OrderingError::LabelMismatch { .. })));
    }

    #[test]
    fn graph_mode_rejects_all_noise_features() {
        let d = random_dataset(30, 6, 9);
        let method = ClusterMethod::Dbscan(DbscanConfig { eps: 1e-6, min_pts: 2 });
        let err = order_features(&d, &OrderingConfig::graph(0.3), &method).unwrap_err();
        assert!(matches!(err, OrderingError::AllNoise));
    }
}
