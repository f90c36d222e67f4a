use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dpgp::commands;
use dpgp::config::RunConfig;
use dpgp::error::{CliError, CliResult, EXIT_OK};
use dpgp_core::models::ModelKind;
use dpgp_core::simgen::Split;

/// Distance-preserving deep neural GP approximation: synthetic data,
/// training, uncertainty evaluation and ensembles.
///
/// Exit codes: 0 success, 1 output write failure, 2 invalid arguments,
/// configuration or inputs, 3 numerical divergence.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    SvdDngpa,
    Dngpa,
    Bnn,
    Dqr,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::SvdDngpa => ModelKind::SvdDngpa,
            Kind::Dngpa => ModelKind::Dngpa,
            Kind::Bnn => ModelKind::Bnn,
            Kind::Dqr => ModelKind::Dqr,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalSplit {
    Id,
    Ood,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "DPGP_OUT", default_value = "dpgp-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        kind: Option<Kind>,
    },
    /// Generate, clean and window the dataset.
    /// Writes dataset.json and features.f32.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Norm preservation of the truncated SVD of the training features.
    /// Writes svd_report.json.
    SvdReport {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, env = "DPGP_OUT", default_value = "dpgp-out")]
        out: PathBuf,
    },
    /// Train one model. Writes model.json, model.f64, history.csv
    /// (epoch,train_loss,test_loss,lengthscale,noise,dropout_p) and
    /// train_summary.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Overrides the configured kind.
        #[arg(long)]
        kind: Option<Kind>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Predict a split. Writes predictions_<split>.csv
    /// (sample,true_*,mean_*,sigma_*[,q159_*,q500_*,q841_*]),
    /// metrics_<split>.json and calibration_<split>.csv (expected,observed).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "id")]
        split: EvalSplit,
    },
    /// Train and evaluate an ensemble over consecutive seeds. Writes
    /// ensemble.json, summary.csv (split,metric,mean,std) and members.csv
    /// (seed,split,r2,rmse,rmsce,mace,miscalibration_area,mean_sigma,best_epoch).
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kind: Option<Kind>,
        /// Members; overrides training.ensemble_size.
        #[arg(long)]
        n: Option<usize>,
        /// Worker threads; overrides workers (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Input against latent pairwise distances on the training set. Writes
    /// distance.json and distance_scatter.csv (i,j,input_distance,latent_distance).
    DistanceReport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Per-triplet OOD RMSE. Writes ood_grid.json and ood_grid.csv
    /// (c1,c2,c3,count,rmse).
    OodGrid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn load(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    RunConfig::load_or_default(path.as_deref())
}

fn print<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Config { config, kind } => {
            let cfg = load(&config)?;
            let kind = kind.map_or(cfg.kind, Into::into);
            print(&cfg.resolved(kind))
        }
        Command::GenData { common } => {
            let side = commands::gen_data(&load(&common.config)?, &common.out)?;
            print(&side.counts)
        }
        Command::SvdReport { data, k, out } => {
            let r = commands::svd_report(&data, k, &out)?;
            print(&serde_json::json!({
                "k": r.k,
                "tail_energy": r.tail_energy,
                "min_sample_norm": r.min_sample_norm,
                "max_norm_loss": r.max_norm_loss,
                "expected_degradation": r.expected_degradation,
                "bound_violations": r.bound_violations,
            }))
        }
        Command::Train { common, data, kind, seed } => {
            let cfg = load(&common.config)?;
            let kind = kind.map_or(cfg.kind, Into::into);
            print(&commands::train_cmd(&cfg, &data, kind, seed, &common.out)?)
        }
        Command::Evaluate { common, model, data, split } => {
            let split = match split {
                EvalSplit::Id => Split::IdTest,
                EvalSplit::Ood => Split::Ood,
            };
            let r = commands::evaluate_cmd(&load(&common.config)?, &model, &data, split, &common.out)?;
            print(&r.pooled)
        }
        Command::Ensemble { common, data, kind, n, workers } => {
            let mut cfg = load(&common.config)?;
            if let Some(n) = n {
                cfg.training.ensemble_size = n;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate()?;
            let kind = kind.map_or(cfg.kind, Into::into);
            let r = commands::ensemble_cmd(&cfg, &data, kind, &common.out)?;
            print(&r.summary)
        }
        Command::DistanceReport { common, model, data } => {
            let r = commands::distance_cmd(&load(&common.config)?, &model, &data, &common.out)?;
            print(&serde_json::json!({ "pearson": r.pearson, "spearman": r.spearman, "pairs": r.pairs.len() }))
        }
        Command::OodGrid { common, model, data } => {
            let r = commands::ood_grid_cmd(&load(&common.config)?, &model, &data, &common.out)?;
            print(&serde_json::json!({ "near": r.near, "far": r.far }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

