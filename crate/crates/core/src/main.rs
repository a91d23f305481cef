use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, warn};

use tabseq::experiment::{
    ablate, evaluate_checkpoint, order_only, run_experiment, seed_dir, train_only, ExperimentConfig, ExperimentError, ABLATION_FILE, METRICS_FILE,
};
use tabseq::ordering::SortDirection;

#[derive(Parser)]
#[command(name = "tabseq", version, about = "Cluster-driven feature ordering with an attention autoencoder classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster and order features on the training split; write the
    /// permutation file and a reordered CSV.
    Order(Overrides),
    /// Train and save checkpoints without scoring the test split.
    Train(Overrides),
    /// Score a saved checkpoint on the test split (or another CSV).
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV to score instead of the configured test split.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Full pipeline for every seed, with metrics.csv.
    Run(Overrides),
    /// Sweep clustering algorithm x cluster count x direction.
    Ablate(Overrides),
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Asc,
    Desc,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured seeds; repeat for several.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, value_enum)]
    direction: Option<Direction>,
    #[arg(long)]
    no_ordering: bool,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(k) = self.clusters {
            cfg.clustering.num_clusters = k;
            cfg.ablation.cluster_counts = (1..=k).collect();
        }
        if let Some(d) = self.direction {
            let d = match d {
                Direction::Asc => SortDirection::Ascending,
                Direction::Desc => SortDirection::Descending,
            };
            cfg.ordering.config.direction = d;
            cfg.ablation.directions = vec![d];
        }
        if self.no_ordering {
            cfg.ordering.enabled = false;
        }
        Ok(cfg)
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn execute(command: Command) -> Result<bool, ExperimentError> {
    match command {
        Command::Order(o) => {
            let cfg = o.load()?;
            for &seed in &cfg.seeds {
                let dir = if cfg.seeds.len() == 1 { cfg.output_dir.clone() } else { seed_dir(&cfg.output_dir, seed) };
                let file = order_only(&cfg, seed, &dir)?;
                println!("seed {seed}: {} features ordered, cost {} -> {}", file.features.len(), fmt(file.cost), dir.display());
                println!("  {}", file.ordered_names().join(" "));
            }
            Ok(true)
        }
        Command::Train(o) => {
            let cfg = o.load()?;
            for f in train_only(&cfg)? {
                let last = f.dae_curve.last().map(|e| e.train_loss);
                let acc = f.classifier_curve.last().map(|e| e.train_accuracy);
                println!(
                    "seed {}: reconstruction {} train accuracy {} -> {}",
                    f.prepared.seed,
                    fmt(last),
                    fmt(acc),
                    seed_dir(&cfg.output_dir, f.prepared.seed).display()
                );
            }
            Ok(true)
        }
        Command::Evaluate { overrides, checkpoint, data } => {
            let cfg = overrides.load()?;
            let report = evaluate_checkpoint(&cfg, &checkpoint, data.as_deref())?;
            print!("{report}");
            Ok(true)
        }
        Command::Run(o) => {
            let cfg = o.load()?;
            let s = run_experiment(&cfg)?;
            for o in &s.seeds {
                match &o.result {
                    Ok(r) => println!("seed {}: accuracy {:.4} auc {:.4}", o.seed, r.report.accuracy, r.report.auc),
                    Err(e) => println!("seed {}: FAILED {e}", o.seed),
                }
            }
            println!(
                "mean accuracy {} (std {}), mean auc {} (std {})",
                fmt(s.mean_accuracy),
                fmt(s.std_accuracy),
                fmt(s.mean_auc),
                fmt(s.std_auc)
            );
            println!("metrics: {}", cfg.output_dir.join(METRICS_FILE).display());
            let all_ok = s.failures().next().is_none();
            Ok(all_ok)
        }
        Command::Ablate(o) => {
            let cfg = o.load()?;
            let rows = ablate(&cfg)?;
            let mut all_ok = true;
            for r in &rows {
                all_ok &= r.status == "ok";
                println!(
                    "{:<8} k={:<4} {:<4} F_G={:<10} acc={} auc={} {}",
                    r.algorithm.name(),
                    r.num_clusters,
                    r.direction.short(),
                    fmt(r.f_g),
                    fmt(r.accuracy),
                    fmt(r.auc),
                    r.status
                );
            }
            println!("grid: {}", Path::new(&cfg.output_dir).join(ABLATION_FILE).display());
            Ok(all_ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            warn!("some runs failed");
            ExitCode::from(3)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
