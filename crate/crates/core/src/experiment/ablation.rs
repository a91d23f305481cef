use std::collections::BTreeSet;
use std::path::Path;

use log::info;

use super::config::{Algorithm, ExperimentConfig};
use super::runner::{create_file, io_err, load_dataset, load_external_labels, mean_std, run_on};
use super::{ExperimentError, Result};
use crate::ordering::{OrderingMode, SortDirection};

pub const ABLATION_FILE: &str = "ablation.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub algorithm: Algorithm,
    /// Requested k for k-means; clusters found for DBSCAN and external
    /// labels (values from different seeds joined with `/`).
    pub num_clusters: String,
    pub direction: SortDirection,
    pub mode: OrderingMode,
    /// Mean global ordering cost over successful seeds.
    pub f_g: Option<f64>,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    /// `ok`, `partial i/n: <first error>` or `failed: <first error>`.
    pub status: String,
}

/// Every cell of the grid: `(algorithm, k, direction)`. Algorithms whose
/// cluster count is not an input get one cell per direction.
pub fn ablation_cells(cfg: &ExperimentConfig) -> Vec<(Algorithm, Option<usize>, SortDirection)> {
    let a = &cfg.ablation;
    let mut cells = Vec::new();
    for &alg in &a.algorithms {
        let ks: Vec<Option<usize>> = match alg {
            Algorithm::Kmeans => a.cluster_counts.iter().map(|&k| Some(k)).collect(),
            Algorithm::Dbscan | Algorithm::External => vec![None],
        };
        for k in ks {
            for &dir in &a.directions {
                cells.push((alg, k, dir));
            }
        }
    }
    cells
}

/// Runs the full experiment once per grid cell (same seeds everywhere),
/// sequentially, and writes `ablation.csv`. Cells that fail are recorded
/// with their error, never dropped.
pub fn ablate(cfg: &ExperimentConfig) -> Result<Vec<AblationRow>> {
    let cells = ablation_cells(cfg);
    if cells.is_empty() {
        return Err(ExperimentError::Config("ablation grid is empty".into()));
    }
    let base = ExperimentConfig {
        ordering: super::config::OrderingSection {
            enabled: true,
            ..cfg.ordering.clone()
        },
        ..cfg.clone()
    };
    base.validate()?;
    let data = load_dataset(&base)?;
    let mut rows = Vec::with_capacity(cells.len());
    for (alg, k, dir) in cells {
        let mut cell = base.clone();
        cell.clustering.algorithm = alg;
        if let Some(k) = k {
            cell.clustering.num_clusters = k;
        }
        cell.ordering.config.direction = dir;
        let k_tag = k.map(|k| format!("k{k}")).unwrap_or_else(|| "auto".into());
        cell.output_dir = base.output_dir.join("cells").join(format!("{}_{k_tag}_{}", alg.name(), dir.short()));
        info!("ablation cell {}", cell.output_dir.display());
        let row = match cell.validate().and_then(|_| {
            let external = load_external_labels(&cell, &data)?;
            run_on(&cell, &data, external.as_ref())
        }) {
            Ok(summary) => {
                let n = summary.seeds.len();
                let ok: Vec<_> = summary.ok_runs().collect();
                let first_err = summary.failures().next().map(|(s, e)| format!("seed {s}: {e}"));
                let status = match (ok.len(), first_err) {
                    (_, None) => "ok".to_string(),
                    (0, Some(e)) => format!("failed: {e}"),
                    (i, Some(e)) => format!("partial {i}/{n}: {e}"),
                };
                let costs: Vec<f64> = ok.iter().filter_map(|r| r.global_cost).collect();
                let found: BTreeSet<usize> = ok.iter().filter_map(|r| r.n_clusters).collect();
                let num_clusters = match k {
                    Some(k) => k.to_string(),
                    None => found.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("/"),
                };
                AblationRow {
                    algorithm: alg,
                    num_clusters,
                    direction: dir,
                    mode: cell.ordering.config.mode,
                    f_g: mean_std(&costs).map(|x| x.0),
                    accuracy: summary.mean_accuracy,
                    auc: summary.mean_auc,
                    status,
                }
            }
            Err(e) => AblationRow {
                algorithm: alg,
                num_clusters: k.map(|k| k.to_string()).unwrap_or_default(),
                direction: dir,
                mode: cell.ordering.config.mode,
                f_g: None,
                accuracy: None,
                auc: None,
                status: format!("failed: {e}"),
            },
        };
        rows.push(row);
    }
    write_ablation(&base.output_dir.join(ABLATION_FILE), &rows)?;
    Ok(rows)
}

fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let map = |e: csv::Error| ExperimentError::Output(format!("{}: {e}", path.display()));
    w.write_record(["algorithm", "num_clusters", "direction", "mode", "F_G", "accuracy", "auc", "status"]).map_err(map)?;
    let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mode = match r.mode {
            OrderingMode::Variance => "variance",
            OrderingMode::Graph => "graph",
        };
        w.write_record([r.algorithm.name(), &r.num_clusters, r.direction.short(), mode, &f(r.f_g), &f(r.accuracy), &f(r.auc), &r.status])
            .map_err(map)?;
    }
    w.flush().map_err(io_err(path))
}
