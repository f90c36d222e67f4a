//! The pipeline commands behind the CLI. Each writes its outputs into one
//! directory; reports are deterministic for a given configuration, while
//! wall-clock timings go to `run.log` only.

use std::io::Write;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use dpgp_core::ensemble::{run_member, summarize, EnsembleReport};
use dpgp_core::linalg::{norm, truncated_svd, SvdBasis};
use dpgp_core::metrics::{distance_report, evaluate, ood_rmse_grid, DistanceReport, EvaluationReport, OodGridReport};
use dpgp_core::models::{
    build_model, predict, train, History, ModelAssembly, ModelKind, PreparedData, SVD_OVERSAMPLE,
};
use dpgp_core::simgen::{plan_samples, process_sample, Dataset, Split};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::RunConfig;
use crate::dataset_io::{load_dataset, save_dataset, Sidecar};
use crate::error::{write_err, CliError, CliResult};
use crate::report::{
    write_calibration, write_history, write_json, write_members, write_ood_grid, write_predictions, write_scatter,
    write_summary,
};

pub const LOG_FILE: &str = "run.log";
pub const CONFIG_FILE: &str = "effective_config.json";

fn prepare_out(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(write_err(out))
}

/// Appends a timestamped line to the run log.
fn log(out: &Path, msg: &str) -> CliResult<()> {
    let path = out.join(LOG_FILE);
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(write_err(&path))?;
    writeln!(f, "{secs} {msg}").map_err(write_err(&path))
}

/// Generates the dataset in parallel (sample order is fixed by the plan).
pub fn generate(cfg: &RunConfig) -> CliResult<Dataset> {
    cfg.dataset.region.validate(cfg.simgen.trace_len)?;
    let plan = plan_samples(&cfg.dataset, &cfg.simgen)?;
    let features = plan
        .par_iter()
        .map(|p| process_sample(p, &cfg.dataset, &cfg.simgen))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::assemble(cfg.dataset.clone(), cfg.simgen.clone(), &plan, features)?)
}

pub fn gen_data(cfg: &RunConfig, out: &Path) -> CliResult<Sidecar> {
    prepare_out(out)?;
    let start = Instant::now();
    let d = generate(cfg)?;
    let side = save_dataset(&d, out)?;
    write_json(&out.join(CONFIG_FILE), cfg)?;
    log(out, &format!("gen-data {} samples in {:.1?}", side.sample_count, start.elapsed()))?;
    Ok(side)
}

/// Norm preservation of the rank-`k` SVD projection of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdReport {
    pub k: usize,
    pub rows: usize,
    pub cols: usize,
    pub exact: bool,
    pub singular_values: Vec<f64>,
    pub tail_energy: f64,
    pub frobenius_sq: f64,
    pub min_sample_norm: f64,
    /// Largest `‖x‖ − ‖xW‖` over training rows.
    pub max_norm_loss: f64,
    /// Tail energy scaled by `d^(-1/4)`.
    pub expected_degradation: f64,
    /// Rows outside `‖x‖ − tail ≤ ‖xW‖ ≤ ‖x‖ + 1e-9`.
    pub bound_violations: usize,
}

pub fn svd_summary(d: &Dataset, k: usize) -> CliResult<(SvdBasis, SvdReport)> {
    let x = d.features(Split::Train);
    let basis = truncated_svd(&x, k, SVD_OVERSAMPLE)?;
    let proj = basis.project(&x)?;
    let (mut min_norm, mut max_loss, mut violations) = (f64::INFINITY, f64::NEG_INFINITY, 0);
    for i in 0..x.rows() {
        let nx = norm(x.row(i));
        let np = norm(proj.row(i));
        min_norm = min_norm.min(nx);
        max_loss = max_loss.max(nx - np);
        if !(nx - basis.tail_energy <= np && np <= nx + 1e-9) {
            violations += 1;
        }
    }
    let report = SvdReport {
        k,
        rows: x.rows(),
        cols: x.cols(),
        exact: basis.exact,
        singular_values: basis.singular_values.clone(),
        tail_energy: basis.tail_energy,
        frobenius_sq: basis.frobenius_sq,
        min_sample_norm: min_norm,
        max_norm_loss: max_loss,
        expected_degradation: dpgp_core::linalg::expected_norm_degradation(&basis, x.cols()),
        bound_violations: violations,
    };
    Ok((basis, report))
}

pub fn svd_report(data: &Path, k: usize, out: &Path) -> CliResult<SvdReport> {
    prepare_out(out)?;
    let d = load_dataset(data)?;
    let (_, report) = svd_summary(&d, k)?;
    write_json(&out.join("svd_report.json"), &report)?;
    Ok(report)
}

/// Summary written next to a trained checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub best_test_loss: f64,
}

pub fn train_model(
    cfg: &RunConfig,
    d: &Dataset,
    kind: ModelKind,
    seed: u64,
) -> CliResult<(ModelAssembly, History)> {
    let mut model = build_model(kind, &cfg.model, d, seed, None)?;
    let history = train(&mut model, PreparedData::new(d).view(), &cfg.training)?;
    Ok((model, history))
}

pub fn train_cmd(cfg: &RunConfig, data: &Path, kind: ModelKind, seed: u64, out: &Path) -> CliResult<TrainSummary> {
    prepare_out(out)?;
    let cfg = cfg.resolved(kind);
    let d = load_dataset(data)?;
    let start = Instant::now();
    let (model, history) = train_model(&cfg, &d, kind, seed)?;
    save_checkpoint(&model, out)?;
    write_history(&out.join("history.csv"), &history)?;
    let summary = TrainSummary {
        kind,
        seed,
        epochs_run: history.epochs.len(),
        best_epoch: history.best_epoch,
        stopped_early: history.stopped_early,
        best_test_loss: history.epochs[history.best_epoch - 1].test_loss,
    };
    write_json(&out.join("train_summary.json"), &summary)?;
    write_json(&out.join(CONFIG_FILE), &cfg)?;
    log(out, &format!("train {} seed {seed} in {:.1?}", kind.name(), start.elapsed()))?;
    Ok(summary)
}

/// Standardised features, labels (pF) and sample indices of a split.
type SplitRows<'a> = (dpgp_core::linalg::Matrix, &'a [[f64; 3]], &'a [usize]);

fn split_rows(d: &Dataset, split: Split) -> CliResult<SplitRows<'_>> {
    if split == Split::Train {
        return Err(CliError::invalid("evaluation split must be id_test or ood"));
    }
    let p = d.partition(split);
    Ok((d.features(split), &p.labels, &p.sample_ids))
}

pub fn evaluate_cmd(cfg: &RunConfig, model: &Path, data: &Path, split: Split, out: &Path) -> CliResult<EvaluationReport> {
    prepare_out(out)?;
    let m = load_checkpoint(model, None)?;
    let d = load_dataset(data)?;
    let (x, labels, ids) = split_rows(&d, split)?;
    let preds = predict(&m, &x, &cfg.training)?;
    let report = evaluate(&preds, labels)?;
    let name = split.name();
    write_predictions(&out.join(format!("predictions_{name}.csv")), ids, labels, &preds)?;
    write_json(&out.join(format!("metrics_{name}.json")), &report)?;
    write_calibration(&out.join(format!("calibration_{name}.csv")), &report.curve)?;
    Ok(report)
}

/// Trains `cfg.training.ensemble_size` members on `workers` threads.
pub fn run_ensemble_parallel(cfg: &RunConfig, d: &Dataset, kind: ModelKind) -> CliResult<EnsembleReport> {
    let data = PreparedData::new(d);
    let basis = if kind == ModelKind::SvdDngpa {
        Some(truncated_svd(&data.x_train, cfg.model.latent_dim, SVD_OVERSAMPLE)?)
    } else {
        None
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::invalid(e.to_string()))?;
    let seeds = dpgp_core::ensemble::member_seeds(&cfg.training);
    let results = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| (seed, run_member(kind, &cfg.model, &cfg.training, d, &data, basis.as_ref(), seed)))
            .collect()
    });
    Ok(summarize(kind, &cfg.training, results)?)
}

pub fn ensemble_cmd(cfg: &RunConfig, data: &Path, kind: ModelKind, out: &Path) -> CliResult<EnsembleReport> {
    prepare_out(out)?;
    let cfg = cfg.resolved(kind);
    let d = load_dataset(data)?;
    let start = Instant::now();
    let report = run_ensemble_parallel(&cfg, &d, kind)?;
    write_json(&out.join("ensemble.json"), &report)?;
    write_summary(&out.join("summary.csv"), &report)?;
    write_members(&out.join("members.csv"), &report)?;
    write_json(&out.join(CONFIG_FILE), &cfg)?;
    log(
        out,
        &format!("ensemble {} x{} in {:.1?}", kind.name(), report.requested, start.elapsed()),
    )?;
    Ok(report)
}

pub fn distance_cmd(cfg: &RunConfig, model: &Path, data: &Path, out: &Path) -> CliResult<DistanceReport> {
    prepare_out(out)?;
    let m = load_checkpoint(model, None)?;
    let d = load_dataset(data)?;
    let x = d.features(Split::Train);
    let mc = &cfg.metrics;
    let report = distance_report(&m, &x, mc.distance_stage, mc.pair_fraction, mc.pair_seed)?;
    #[derive(Serialize)]
    struct Summary {
        stage: dpgp_core::models::Stage,
        pairs: usize,
        pearson: f64,
        spearman: f64,
    }
    let summary = Summary {
        stage: report.stage,
        pairs: report.pairs.len(),
        pearson: report.pearson,
        spearman: report.spearman,
    };
    write_json(&out.join("distance.json"), &summary)?;
    write_scatter(&out.join("distance_scatter.csv"), &report)?;
    Ok(report)
}

pub fn ood_grid_cmd(cfg: &RunConfig, model: &Path, data: &Path, out: &Path) -> CliResult<OodGridReport> {
    prepare_out(out)?;
    let m = load_checkpoint(model, None)?;
    let d = load_dataset(data)?;
    let preds = predict(&m, &d.features(Split::Ood), &cfg.training)?;
    let report = ood_rmse_grid(&preds.means(), &d.ood.labels, &d.spec.ood_values)?;
    write_json(&out.join("ood_grid.json"), &report)?;
    write_ood_grid(&out.join("ood_grid.csv"), &report)?;
    Ok(report)
}
