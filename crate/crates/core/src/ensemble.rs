//! Repeated training over consecutive seeds with mean ± std summaries.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SvdBasis;
use crate::metrics::{evaluate, ood_rmse_grid, EvaluationReport, MetricSet, OodGridReport};
use crate::models::{
    build_model, predict, train, ArchConfig, History, ModelAssembly, ModelKind, PreparedData, TrainConfig,
};
use crate::simgen::{Dataset, Split};

/// Evaluation of one trained member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub id: EvaluationReport,
    pub ood: EvaluationReport,
    pub grid: OodGridReport,
}

/// Mean and population standard deviation of one metric across members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub split: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub kind: ModelKind,
    pub requested: usize,
    pub seeds: Vec<u64>,
    /// Seeds whose training diverged.
    pub diverged: Vec<u64>,
    pub summary: Vec<SummaryRow>,
    pub members: Vec<MemberOutcome>,
}

/// Seeds of an `n`-member ensemble.
pub fn member_seeds(cfg: &TrainConfig) -> Vec<u64> {
    (0..cfg.ensemble_size as u64).map(|i| cfg.seed.wrapping_add(i)).collect()
}

/// Builds, trains and evaluates one member.
pub fn run_member(
    kind: ModelKind,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    dataset: &Dataset,
    data: &PreparedData,
    basis: Option<&SvdBasis>,
    seed: u64,
) -> Result<MemberOutcome> {
    let mut model = build_model(kind, arch, dataset, seed, basis)?;
    let history = train(&mut model, data.view(), cfg)?;
    assess_member(&model, &history, cfg, dataset, data)
}

/// ID, OOD and grid evaluation of a trained member.
pub fn assess_member(
    model: &ModelAssembly,
    history: &History,
    cfg: &TrainConfig,
    dataset: &Dataset,
    data: &PreparedData,
) -> Result<MemberOutcome> {
    let id_pred = predict(model, &data.x_test, cfg)?;
    let ood_pred = predict(model, &dataset.features(Split::Ood), cfg)?;
    let grid = ood_rmse_grid(&ood_pred.means(), &dataset.ood.labels, &dataset.spec.ood_values)?;
    Ok(MemberOutcome {
        seed: model.seed,
        best_epoch: history.best_epoch,
        epochs_run: history.epochs.len(),
        id: evaluate(&id_pred, &dataset.id_test.labels)?,
        ood: evaluate(&ood_pred, &dataset.ood.labels)?,
        grid,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Summary metric names, in the order of [`metric_values`].
pub const METRICS: [&str; 6] = ["r2", "rmse", "rmsce", "mace", "miscalibration_area", "mean_sigma"];

fn metric_values(m: &MetricSet) -> [f64; 6] {
    [m.r2, m.rmse, m.rmsce, m.mace, m.miscalibration_area, m.mean_sigma]
}

/// Collects member results in seed order. Diverged members are dropped; any
/// other error is returned as is. Fails when fewer than the required
/// fraction survive.
pub fn summarize(
    kind: ModelKind,
    cfg: &TrainConfig,
    results: Vec<(u64, Result<MemberOutcome>)>,
) -> Result<EnsembleReport> {
    let requested = results.len();
    let seeds = results.iter().map(|r| r.0).collect();
    let mut members = Vec::new();
    let mut diverged = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(m) => members.push(m),
            Err(Error::Divergence { .. }) => diverged.push(seed),
            Err(e) => return Err(e),
        }
    }
    if requested == 0 || members.len() < cfg.min_survivors(requested) {
        return Err(Error::EnsembleAborted {
            survivors: members.len(),
            total: requested,
        });
    }
    let mut summary = Vec::new();
    let mut push = |split: &str, metric: &str, values: Vec<f64>| {
        let (mean, std) = mean_std(&values);
        summary.push(SummaryRow {
            split: split.into(),
            metric: metric.into(),
            mean,
            std,
        });
    };
    for (split, ood) in [("id_test", false), ("ood", true)] {
        let rows: Vec<[f64; 6]> = members
            .iter()
            .map(|m| metric_values(if ood { &m.ood.pooled } else { &m.id.pooled }))
            .collect();
        for (col, name) in METRICS.iter().enumerate() {
            push(split, name, rows.iter().map(|r| r[col]).collect());
        }
    }
    push("ood", "near_rmse", members.iter().map(|m| m.grid.near).collect());
    push("ood", "far_rmse", members.iter().map(|m| m.grid.far).collect());
    Ok(EnsembleReport {
        kind,
        requested,
        seeds,
        diverged,
        summary,
        members,
    })
}

/// Trains `cfg.ensemble_size` members sequentially.
pub fn run_ensemble(
    kind: ModelKind,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    dataset: &Dataset,
    basis: Option<&SvdBasis>,
) -> Result<EnsembleReport> {
    let data = PreparedData::new(dataset);
    let results = member_seeds(cfg)
        .into_iter()
        .map(|seed| (seed, run_member(kind, arch, cfg, dataset, &data, basis, seed)))
        .collect();
    summarize(kind, cfg, results)
}
