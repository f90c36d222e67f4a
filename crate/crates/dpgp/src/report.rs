//! JSON and CSV writers. Floats use the shortest representation that
//! round-trips, so identical runs give identical bytes.

use std::path::Path;

use dpgp_core::ensemble::EnsembleReport;
use dpgp_core::metrics::{CalibrationCurve, DistanceReport, OodGridReport};
use dpgp_core::models::{History, PredictionSet};
use dpgp_core::LABELS;
use serde::Serialize;

use crate::error::{write_err, CliError, CliResult};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(write_err(path))
}

/// Writes `header` then `rows` as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let to_io = |e: csv::Error| std::io::Error::other(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path)(to_io(e)))?;
    w.write_record(header).map_err(|e| write_err(path)(to_io(e)))?;
    for r in rows {
        w.write_record(&r).map_err(|e| write_err(path)(to_io(e)))?;
    }
    w.flush().map_err(write_err(path))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Columns: epoch, train_loss, test_loss, lengthscale, noise, dropout_p.
pub fn write_history(path: &Path, h: &History) -> CliResult<()> {
    write_csv(
        path,
        &["epoch", "train_loss", "test_loss", "lengthscale", "noise", "dropout_p"],
        h.epochs.iter().map(|e| {
            vec![
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.test_loss.to_string(),
                e.lengthscale.to_string(),
                opt(e.noise),
                opt(e.dropout_p),
            ]
        }),
    )
}

/// Columns: sample, true_1..3, mean_1..3, sigma_1..3, and for quantile
/// models q159_1..3, q500_1..3, q841_1..3. All values in pF.
pub fn write_predictions(path: &Path, ids: &[usize], labels: &[[f64; LABELS]], p: &PredictionSet) -> CliResult<()> {
    let quantiles = p.predictions.first().is_some_and(|x| x.quantiles.is_some());
    let mut header: Vec<String> = vec!["sample".into()];
    for prefix in ["true", "mean", "sigma"] {
        header.extend((1..=LABELS).map(|j| format!("{prefix}_{j}")));
    }
    if quantiles {
        for prefix in ["q159", "q500", "q841"] {
            header.extend((1..=LABELS).map(|j| format!("{prefix}_{j}")));
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header,
        p.predictions.iter().zip(labels).zip(ids).map(|((pred, label), id)| {
            let mut row = vec![id.to_string()];
            for v in label.iter().chain(&pred.mean).chain(&pred.sigma) {
                row.push(v.to_string());
            }
            if let Some(q) = &pred.quantiles {
                row.extend(q.iter().flatten().map(f64::to_string));
            }
            row
        }),
    )
}

/// Columns: expected, observed.
pub fn write_calibration(path: &Path, c: &CalibrationCurve) -> CliResult<()> {
    write_csv(
        path,
        &["expected", "observed"],
        c.expected.iter().zip(&c.observed).map(|(e, o)| vec![e.to_string(), o.to_string()]),
    )
}

/// Columns: c1, c2, c3 (pF), count, rmse (pF).
pub fn write_ood_grid(path: &Path, r: &OodGridReport) -> CliResult<()> {
    write_csv(
        path,
        &["c1", "c2", "c3", "count", "rmse"],
        r.cells.iter().map(|c| {
            vec![
                c.caps[0].to_string(),
                c.caps[1].to_string(),
                c.caps[2].to_string(),
                c.count.to_string(),
                c.rmse.to_string(),
            ]
        }),
    )
}

/// Columns: i, j, input_distance, latent_distance.
pub fn write_scatter(path: &Path, r: &DistanceReport) -> CliResult<()> {
    write_csv(
        path,
        &["i", "j", "input_distance", "latent_distance"],
        r.pairs
            .iter()
            .zip(r.input.iter().zip(&r.latent))
            .map(|((i, j), (a, b))| vec![i.to_string(), j.to_string(), a.to_string(), b.to_string()]),
    )
}

/// Columns: split, metric, mean, std.
pub fn write_summary(path: &Path, r: &EnsembleReport) -> CliResult<()> {
    write_csv(
        path,
        &["split", "metric", "mean", "std"],
        r.summary
            .iter()
            .map(|s| vec![s.split.clone(), s.metric.clone(), s.mean.to_string(), s.std.to_string()]),
    )
}

/// Columns: seed, split, r2, rmse, rmsce, mace, miscalibration_area,
/// mean_sigma, best_epoch.
pub fn write_members(path: &Path, r: &EnsembleReport) -> CliResult<()> {
    let mut header = vec!["seed", "split"];
    header.extend(dpgp_core::ensemble::METRICS);
    header.push("best_epoch");
    write_csv(
        path,
        &header,
        r.members.iter().flat_map(|m| {
            [("id_test", &m.id), ("ood", &m.ood)].map(|(split, e)| {
                let p = &e.pooled;
                let mut row = vec![m.seed.to_string(), split.to_string()];
                row.extend([p.r2, p.rmse, p.rmsce, p.mace, p.miscalibration_area, p.mean_sigma].map(|v| v.to_string()));
                row.push(m.best_epoch.to_string());
                row
            })
        }),
    )
}
