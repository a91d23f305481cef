use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info};
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig};
use super::{ExperimentError, Result};
use crate::cluster::{read_labels, ClusteringResult};
use crate::data::{apply_permutation, apply_scaler, fit_scaler, load_csv, stratified_indices, write_csv, Dataset, ScalerParams, SplitIndices, SplitSpec};
use crate::eval::MetricReport;
use crate::nn::{train_classifier, train_dae, Architecture, Checkpoint, ClassifierEpoch, EpochLoss, TabSeqModel, TrainConfig};
use crate::ordering::{order_features, write_permutation_file, ClusterMethod, ClusterTarget, OrderingOutcome, Permutation, PermutationFile};

pub const METRICS_FILE: &str = "metrics.csv";
pub const ORDERING_FILE: &str = "ordering.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const LOSSES_FILE: &str = "losses.csv";
pub const REORDERED_FILE: &str = "reordered.csv";

/// Splits of one seed after scaling and, when enabled, reordering.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub split: SplitIndices,
    pub scaler: ScalerParams,
    pub ordering: Option<OrderingOutcome>,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Prepared {
    pub fn permutation(&self) -> Option<&Permutation> {
        self.ordering.as_ref().map(|o| &o.permutation)
    }
}

/// Everything the checkpoint needs besides the network to score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMeta {
    pub target: String,
    /// Feature names in the source column order.
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub scaler: ScalerParams,
    pub permutation: Option<Vec<usize>>,
    pub split: SplitSpec,
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub prepared: Prepared,
    pub model: TabSeqModel,
    pub architecture: Architecture,
    pub train_config: TrainConfig,
    pub dae_curve: Vec<EpochLoss>,
    pub classifier_curve: Vec<ClassifierEpoch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub report: MetricReport,
    /// Cost annotation of the global permutation.
    pub global_cost: Option<f64>,
    pub n_clusters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub result: std::result::Result<SeedRun, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub seeds: Vec<SeedOutcome>,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_auc: Option<f64>,
    pub std_auc: Option<f64>,
}

impl ExperimentSummary {
    pub fn ok_runs(&self) -> impl Iterator<Item = &SeedRun> {
        self.seeds.iter().filter_map(|s| s.result.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &str)> {
        self.seeds.iter().filter_map(|s| s.result.as_ref().err().map(|e| (s.seed, e.as_str())))
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    Ok(load_csv(&cfg.data.path, &cfg.data.target, &cfg.data.drop)?)
}

/// External cluster labels named in the config, if any, checked against
/// the dataset they will be applied to.
pub fn load_external_labels(cfg: &ExperimentConfig, data: &Dataset) -> Result<Option<ClusteringResult>> {
    if !cfg.ordering.enabled || cfg.clustering.algorithm != Algorithm::External {
        return Ok(None);
    }
    let path = cfg
        .clustering
        .labels
        .as_ref()
        .ok_or_else(|| ExperimentError::Config("external clustering needs clustering.labels".into()))?;
    let f = File::open(path).map_err(io_err(path))?;
    let labels = read_labels(BufReader::new(f))?;
    let (want, what) = match cfg.ordering.config.target() {
        ClusterTarget::Samples => (data.n_samples(), "dataset rows"),
        ClusterTarget::Features => (data.n_features(), "features"),
    };
    if labels.len() != want {
        return Err(ExperimentError::Config(format!("{} external labels for {want} {what}", labels.len())));
    }
    Ok(Some(labels))
}

fn bind_method(cfg: &ExperimentConfig, seed: u64, external: Option<&ClusteringResult>, split: &SplitIndices, m: usize) -> Result<ClusterMethod> {
    if cfg.clustering.algorithm != Algorithm::External {
        return cfg.clustering.method(seed);
    }
    let ext = external.ok_or_else(|| ExperimentError::Config("external labels were not loaded".into()))?;
    let labels = match cfg.ordering.config.target() {
        ClusterTarget::Samples => {
            if ext.len() != split.train.len() + split.val.len() + split.test.len() {
                return Err(ExperimentError::Config(format!("{} external labels for {} dataset rows", ext.len(), split.train.len() + split.val.len() + split.test.len())));
            }
            let raw: Vec<i64> = split.train.iter().map(|&r| i64::from(ext.labels[r])).collect();
            ClusteringResult::from_external(&raw)?
        }
        ClusterTarget::Features => {
            if ext.len() != m {
                return Err(ExperimentError::Config(format!("{} external labels for {m} features", ext.len())));
            }
            ext.clone()
        }
    };
    Ok(ClusterMethod::External(labels))
}

/// Split, scale (fit on train) and order (on train) for one seed.
pub fn prepare(cfg: &ExperimentConfig, data: &Dataset, seed: u64, external: Option<&ClusteringResult>) -> Result<Prepared> {
    let spec = cfg.split.spec(seed);
    let split = stratified_indices(&data.labels, data.n_classes(), &spec)?;
    let (train, val, test) = (data.select_rows(&split.train), data.select_rows(&split.val), data.select_rows(&split.test));
    let scaler = fit_scaler(&train, cfg.scaler);
    let (mut train, mut val, mut test) = (apply_scaler(&train, &scaler)?, apply_scaler(&val, &scaler)?, apply_scaler(&test, &scaler)?);
    let ordering = if cfg.ordering.enabled {
        let method = bind_method(cfg, seed, external, &split, data.n_features())?;
        let outcome = order_features(&train, &cfg.ordering.config, &method)?;
        let p = &outcome.permutation;
        train = apply_permutation(&train, p)?;
        val = apply_permutation(&val, p)?;
        test = apply_permutation(&test, p)?;
        Some(outcome)
    } else {
        None
    };
    Ok(Prepared {
        seed,
        split,
        scaler,
        ordering,
        train,
        val,
        test,
    })
}

/// Trains the autoencoder and the classifier on a prepared split.
pub fn fit(cfg: &ExperimentConfig, prepared: Prepared) -> Result<Fitted> {
    let tcfg = TrainConfig {
        seed: prepared.seed,
        ..cfg.train.clone()
    };
    let (train, val) = (&prepared.train, &prepared.val);
    let val_view = (val.n_samples() > 0).then(|| val.values.view());
    let dae = train_dae(train.values.view(), val_view, &tcfg)?;
    let z_train = dae.params.encode(train.values.view())?;
    let z_val = dae.params.encode(val.values.view())?;
    let val_codes = (val.n_samples() > 0).then(|| (z_val.view(), val.labels.as_slice()));
    let clf = train_classifier(z_train.view(), &train.labels, val_codes, train.n_classes(), &tcfg)?;
    let architecture = Architecture::new(train.n_features(), train.n_classes(), &tcfg);
    Ok(Fitted {
        prepared,
        model: TabSeqModel {
            dae: dae.params,
            classifier: clf.params,
        },
        architecture,
        train_config: tcfg,
        dae_curve: dae.curve,
        classifier_curve: clf.curve,
    })
}

fn ordering_config_json(cfg: &ExperimentConfig, seed: u64) -> serde_json::Value {
    serde_json::json!({
        "seed": seed,
        "ordering": cfg.ordering,
        "clustering": cfg.clustering,
        "split": cfg.split,
        "scaler": cfg.scaler,
    })
}

pub fn write_ordering(path: &Path, cfg: &ExperimentConfig, seed: u64, outcome: &OrderingOutcome, source_names: &[String]) -> Result<PermutationFile> {
    let file = PermutationFile::new(&outcome.permutation, source_names, outcome.clustering.weights.clone(), ordering_config_json(cfg, seed))?;
    let mut w = create_file(path)?;
    write_permutation_file(&file, &mut w)?;
    w.flush().map_err(io_err(path))?;
    Ok(file)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_losses(path: &Path, f: &Fitted) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let map = |e: csv::Error| ExperimentError::Output(format!("{}: {e}", path.display()));
    w.write_record(["stage", "epoch", "train_loss", "val_loss", "train_accuracy", "val_accuracy"]).map_err(map)?;
    for e in &f.dae_curve {
        w.write_record(["dae".to_string(), e.epoch.to_string(), e.train_loss.to_string(), fmt_opt(e.val_loss), String::new(), String::new()])
            .map_err(map)?;
    }
    for e in &f.classifier_curve {
        w.write_record([
            "classifier".to_string(),
            e.epoch.to_string(),
            e.train_loss.to_string(),
            fmt_opt(e.val_loss),
            e.train_accuracy.to_string(),
            fmt_opt(e.val_accuracy),
        ])
        .map_err(map)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `ordering.txt` (when ordering ran), `checkpoint.txt` and
/// `losses.csv` into `dir`.
pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, data: &Dataset, f: &Fitted) -> Result<()> {
    let p = &f.prepared;
    if let Some(outcome) = &p.ordering {
        write_ordering(&dir.join(ORDERING_FILE), cfg, p.seed, outcome, &data.feature_names)?;
    }
    let meta = PipelineMeta {
        target: cfg.data.target.clone(),
        feature_names: data.feature_names.clone(),
        class_names: data.class_names.clone(),
        scaler: p.scaler.clone(),
        permutation: p.permutation().map(|q| q.order().to_vec()),
        split: cfg.split.spec(p.seed),
    };
    let meta = serde_json::to_value(&meta).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let ck = Checkpoint::new(&f.model, f.architecture, &f.train_config, meta);
    let path = dir.join(CHECKPOINT_FILE);
    let mut w = create_file(&path)?;
    ck.write(&mut w)?;
    w.flush().map_err(io_err(&path))?;
    write_losses(&dir.join(LOSSES_FILE), f)
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Full pipeline for one seed, scored on the test split.
pub fn run_seed(cfg: &ExperimentConfig, data: &Dataset, seed: u64, external: Option<&ClusteringResult>, out_dir: &Path) -> Result<SeedRun> {
    let t0 = Instant::now();
    let prepared = prepare(cfg, data, seed, external)?;
    let fitted = fit(cfg, prepared)?;
    let test = &fitted.prepared.test;
    let probs = fitted.model.predict_proba(test.values.view())?;
    let report = MetricReport::from_probabilities(&test.labels, probs.view())?;
    write_artifacts(&seed_dir(out_dir, seed), cfg, data, &fitted)?;
    info!(
        "seed {seed}: accuracy {:.4} auc {:.4} ({:.1}s)",
        report.accuracy,
        report.auc,
        t0.elapsed().as_secs_f64()
    );
    let ordering = fitted.prepared.ordering.as_ref();
    Ok(SeedRun {
        seed,
        report,
        global_cost: ordering.and_then(|o| o.permutation.cost()),
        n_clusters: ordering.map(|o| o.clustering.k),
    })
}

/// Runs every seed on an already loaded dataset; a failing seed is
/// recorded and the others continue. Writes `metrics.csv`.
pub fn run_on(cfg: &ExperimentConfig, data: &Dataset, external: Option<&ClusteringResult>) -> Result<ExperimentSummary> {
    let mut seeds = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let result = run_seed(cfg, data, seed, external, &cfg.output_dir).map_err(|e| {
            error!("seed {seed} failed: {e}");
            e.to_string()
        });
        seeds.push(SeedOutcome { seed, result });
    }
    let acc: Vec<f64> = seeds.iter().filter_map(|s| s.result.as_ref().ok()).map(|r| r.report.accuracy).collect();
    let auc: Vec<f64> = seeds.iter().filter_map(|s| s.result.as_ref().ok()).map(|r| r.report.auc).collect();
    let (a, u) = (mean_std(&acc), mean_std(&auc));
    let summary = ExperimentSummary {
        seeds,
        mean_accuracy: a.map(|x| x.0),
        std_accuracy: a.map(|x| x.1),
        mean_auc: u.map(|x| x.0),
        std_auc: u.map(|x| x.1),
    };
    write_metrics(&cfg.output_dir.join(METRICS_FILE), &summary)?;
    Ok(summary)
}

/// Validates the config, loads the data and runs all seeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let external = load_external_labels(cfg, &data)?;
    run_on(cfg, &data, external.as_ref())
}

fn write_metrics(path: &Path, s: &ExperimentSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let map = |e: csv::Error| ExperimentError::Output(format!("{}: {e}", path.display()));
    w.write_record(["seed", "status", "accuracy", "auc", "global_cost", "n_clusters", "message"]).map_err(map)?;
    for o in &s.seeds {
        let rec = match &o.result {
            Ok(r) => [
                o.seed.to_string(),
                "ok".into(),
                r.report.accuracy.to_string(),
                r.report.auc.to_string(),
                fmt_opt(r.global_cost),
                r.n_clusters.map(|k| k.to_string()).unwrap_or_default(),
                String::new(),
            ],
            Err(e) => [o.seed.to_string(), "failed".into(), String::new(), String::new(), String::new(), String::new(), e.clone()],
        };
        w.write_record(&rec).map_err(map)?;
    }
    let ok = s.ok_runs().count().to_string();
    w.write_record(["mean", &ok, &fmt_opt(s.mean_accuracy), &fmt_opt(s.mean_auc), "", "", ""]).map_err(map)?;
    w.write_record(["std", &ok, &fmt_opt(s.std_accuracy), &fmt_opt(s.std_auc), "", "", ""]).map_err(map)?;
    w.flush().map_err(io_err(path))
}

/// Orders the training split of `seed` and writes `ordering.txt` plus the
/// full dataset with reordered columns to `out_dir`.
pub fn order_only(cfg: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<PermutationFile> {
    if !cfg.ordering.enabled {
        return Err(ExperimentError::Config("ordering is disabled".into()));
    }
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let external = load_external_labels(cfg, &data)?;
    let prepared = prepare(cfg, &data, seed, external.as_ref())?;
    let outcome = prepared.ordering.as_ref().expect("ordering enabled");
    let file = write_ordering(&out_dir.join(ORDERING_FILE), cfg, seed, outcome, &data.feature_names)?;
    let reordered = apply_permutation(&data, &outcome.permutation)?;
    let path = out_dir.join(REORDERED_FILE);
    let mut w = create_file(&path)?;
    write_csv(&reordered, &cfg.data.target, &mut w)?;
    w.flush().map_err(io_err(&path))?;
    Ok(file)
}

/// Trains every seed and writes its artifacts without touching the test
/// split.
pub fn train_only(cfg: &ExperimentConfig) -> Result<Vec<Fitted>> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let external = load_external_labels(cfg, &data)?;
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let fitted = fit(cfg, prepare(cfg, &data, seed, external.as_ref())?)?;
        write_artifacts(&seed_dir(&cfg.output_dir, seed), cfg, &data, &fitted)?;
        out.push(fitted);
    }
    Ok(out)
}

/// Loads a checkpoint written by this crate together with its metadata.
pub fn load_checkpoint(path: &Path) -> Result<(TabSeqModel, PipelineMeta)> {
    let f = File::open(path).map_err(io_err(path))?;
    let ck = Checkpoint::read(BufReader::new(f))?;
    let meta: PipelineMeta = serde_json::from_value(ck.metadata.clone()).map_err(|e| ExperimentError::Config(format!("checkpoint metadata: {e}")))?;
    Ok((ck.model()?, meta))
}

/// Scores raw (unscaled, source-ordered) rows with a saved pipeline.
pub fn evaluate_with(model: &TabSeqModel, meta: &PipelineMeta, data: &Dataset) -> Result<MetricReport> {
    if data.feature_names != meta.feature_names {
        return Err(ExperimentError::Config("dataset features differ from the checkpoint's".into()));
    }
    if data.class_names != meta.class_names {
        return Err(ExperimentError::Config(format!("classes {:?} differ from the checkpoint's {:?}", data.class_names, meta.class_names)));
    }
    let mut x = apply_scaler(data, &meta.scaler)?;
    if let Some(p) = &meta.permutation {
        x = apply_permutation(&x, &Permutation::global(p.clone()))?;
    }
    let probs = model.predict_proba(x.values.view())?;
    Ok(MetricReport::from_probabilities(&x.labels, probs.view())?)
}

/// Recomputes the checkpoint's test split from the config's dataset and
/// scores it.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, checkpoint: &Path, data_override: Option<&Path>) -> Result<MetricReport> {
    let (model, meta) = load_checkpoint(checkpoint)?;
    match data_override {
        Some(p) => evaluate_with(&model, &meta, &load_csv(p, &meta.target, &cfg.data.drop)?),
        None => {
            let data = load_dataset(cfg)?;
            let split = stratified_indices(&data.labels, data.n_classes(), &meta.split)?;
            evaluate_with(&model, &meta, &data.select_rows(&split.test))
        }
    }
}
