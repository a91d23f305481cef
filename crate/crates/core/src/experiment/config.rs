use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, Result};
use crate::cluster::{DbscanConfig, KMeansConfig};
use crate::data::{ScaleMode, SplitSpec};
use crate::nn::TrainConfig;
use crate::ordering::{ClusterMethod, OrderingConfig, SortDirection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub target: String,
    #[serde(default)]
    pub drop: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitConfig {
    pub fn spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train,
            val_fraction: self.val,
            test_fraction: self.test,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderingSection {
    /// `false` trains on the original column order.
    pub enabled: bool,
    #[serde(flatten)]
    pub config: OrderingConfig,
}

impl Default for OrderingSection {
    fn default() -> Self {
        Self {
            enabled: true,
            config: OrderingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Kmeans,
    Dbscan,
    /// Labels read from `clustering.labels`.
    External,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Dbscan => "dbscan",
            Algorithm::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub algorithm: Algorithm,
    pub num_clusters: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub n_init: usize,
    pub eps: Option<f64>,
    pub min_pts: Option<usize>,
    /// One integer label per line: per dataset row when clustering samples,
    /// per feature when clustering features.
    pub labels: Option<PathBuf>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let k = KMeansConfig::default();
        Self {
            algorithm: Algorithm::Kmeans,
            num_clusters: 3,
            max_iters: k.max_iters,
            tol: k.tol,
            n_init: k.n_init,
            eps: None,
            min_pts: None,
            labels: None,
        }
    }
}

impl ClusteringConfig {
    /// Clustering method for k-means or DBSCAN; external labels are bound
    /// by the runner, which knows the training rows.
    pub fn method(&self, seed: u64) -> Result<ClusterMethod> {
        match self.algorithm {
            Algorithm::Kmeans => Ok(ClusterMethod::Kmeans(KMeansConfig {
                num_clusters: self.num_clusters,
                max_iters: self.max_iters,
                tol: self.tol,
                seed,
                n_init: self.n_init,
            })),
            Algorithm::Dbscan => match (self.eps, self.min_pts) {
                (Some(eps), Some(min_pts)) => Ok(ClusterMethod::Dbscan(DbscanConfig { eps, min_pts })),
                _ => Err(ExperimentError::Config("dbscan needs clustering.eps and clustering.min_pts".into())),
            },
            Algorithm::External => Err(ExperimentError::Config("external labels are bound per split".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub algorithms: Vec<Algorithm>,
    /// Ignored for DBSCAN, whose cluster count is an outcome.
    pub cluster_counts: Vec<usize>,
    pub directions: Vec<SortDirection>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::Kmeans],
            cluster_counts: (1..=8).collect(),
            directions: vec![SortDirection::Ascending, SortDirection::Descending],
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Whole experiment description, usually read from a TOML file.
/// `train.seed` is ignored: every entry of `seeds` drives its own run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub scaler: ScaleMode,
    #[serde(default)]
    pub ordering: OrderingSection,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are taken relative to `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        resolve(base_dir, &mut cfg.data.path);
        if let Some(p) = cfg.clustering.labels.as_mut() {
            resolve(base_dir, p);
        }
        resolve(base_dir, &mut cfg.output_dir);
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        self.split.spec(0).validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.train.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        if !self.data.path.is_file() {
            return bad(format!("data file {} does not exist", self.data.path.display()));
        }
        if self.ordering.enabled {
            self.ordering.config.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
            match self.clustering.algorithm {
                Algorithm::Kmeans if self.clustering.num_clusters == 0 => return bad("num_clusters must be positive".into()),
                Algorithm::Dbscan => {
                    self.clustering.method(0)?;
                    if !(self.clustering.eps.unwrap_or(0.0) > 0.0) || self.clustering.min_pts == Some(0) {
                        return bad("dbscan needs eps > 0 and min_pts >= 1".into());
                    }
                }
                Algorithm::External => match &self.clustering.labels {
                    Some(p) if p.is_file() => {}
                    Some(p) => return bad(format!("labels file {} does not exist", p.display())),
                    None => return bad("external clustering needs clustering.labels".into()),
                },
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::OrderingMode;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seeds = [1, 2]
            [data]
            path = "d.csv"
            target = "y"
            "#,
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.data.path, PathBuf::from("/base/d.csv"));
        assert_eq!(cfg.output_dir, PathBuf::from("/base/out"));
        assert!(cfg.ordering.enabled);
        assert_eq!(cfg.ordering.config.direction, SortDirection::Ascending);
        assert_eq!(cfg.clustering.num_clusters, 3);
        assert_eq!(cfg.train.epochs, 50);
        assert_eq!(cfg.ablation.cluster_counts.len(), 8);
    }

    #[test]
    fn nested_sections_parse() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            seeds = [0]
            output_dir = "/tmp/x"
            scaler = "zscore"
            [data]
            path = "/d.csv"
            target = "y"
            drop = ["id"]
            [ordering]
            mode = "graph"
            direction = "desc"
            edge_threshold = 0.5
            [clustering]
            algorithm = "dbscan"
            eps = 0.4
            min_pts = 3
            [train]
            epochs = 3
            noise = { kind = "mask", fraction = 0.2 }
            "#,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.ordering.config.mode, OrderingMode::Graph);
        assert_eq!(cfg.ordering.config.direction, SortDirection::Descending);
        assert_eq!(cfg.scaler, ScaleMode::Zscore);
        assert!(matches!(cfg.clustering.method(0).unwrap(), ClusterMethod::Dbscan(_)));
        assert_eq!(cfg.train.epochs, 3);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml(), Path::new(".")).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_and_missing_values_rejected() {
        let base = Path::new(".");
        assert!(ExperimentConfig::from_toml_str("seeds=[1]\n[data]\npath='a'\ntarget='y'\nbogus=1", base).is_err());
        assert!(ExperimentConfig::from_toml_str("[data]\npath='a'\ntarget='y'", base).is_err());
        let cfg = ExperimentConfig::from_toml_str("seeds=[]\n[data]\npath='a'\ntarget='y'", base).unwrap();
        assert!(matches!(cfg.validate(), Err(ExperimentError::Config(_))));
    }
}
