//! Accuracy and calibration metrics, OOD grid errors and distance
//! preservation diagnostics.

mod calibration;
mod distance;
mod grid;

pub use calibration::{calibration_curve, calibration_grid, normal_cdf, CalibrationCurve, CALIBRATION_LEVELS};
pub use distance::{distance_correlation, distance_report, DistanceReport};
pub use grid::{ood_rmse_grid, OodCell, OodGridReport};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::PredictionSet;
use crate::LABELS;

fn check_pair(op: &'static str, y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            op,
            left: (y.len(), 1),
            right: (yhat.len(), 1),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyPartition(op));
    }
    Ok(())
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair("r2", y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("r2: labels have zero variance"));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair("rmse", y, yhat)?;
    let sq: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(libm::sqrt(sq / y.len() as f64))
}

/// Row-major flattening of label triplets.
pub fn flatten(rows: &[[f64; LABELS]]) -> Vec<f64> {
    rows.iter().flat_map(|r| r.iter().copied()).collect()
}

/// One output column.
pub fn column(rows: &[[f64; LABELS]], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// Smallest σ (pF) passed to the calibration curve; zero σ from clamped
/// quantile gaps is raised to this value.
pub const SIGMA_EPS: f64 = 1e-9;

/// Metrics over one population of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub r2: f64,
    pub rmse: f64,
    pub rmsce: f64,
    pub mace: f64,
    pub miscalibration_area: f64,
    pub mean_sigma: f64,
}

/// Pooled metrics over the three outputs plus a per-output breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub count: usize,
    pub pooled: MetricSet,
    pub per_output: Vec<MetricSet>,
    pub curve: CalibrationCurve,
    /// Quantile-regression σ values clamped at zero.
    pub clamped_sigma: usize,
    /// σ values raised to [`SIGMA_EPS`] before calibration.
    pub floored_sigma: usize,
}

fn metric_set(y: &[f64], mu: &[f64], sigma: &[f64]) -> Result<(MetricSet, CalibrationCurve)> {
    let curve = calibration_curve(y, mu, sigma, CALIBRATION_LEVELS)?;
    let set = MetricSet {
        r2: r2(y, mu)?,
        rmse: rmse(y, mu)?,
        rmsce: curve.rmsce,
        mace: curve.mace,
        miscalibration_area: curve.miscalibration_area,
        mean_sigma: sigma.iter().sum::<f64>() / sigma.len() as f64,
    };
    Ok((set, curve))
}

/// Accuracy and calibration of `predictions` against `labels` (pF).
pub fn evaluate(predictions: &PredictionSet, labels: &[[f64; LABELS]]) -> Result<EvaluationReport> {
    if predictions.predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            op: "evaluate",
            left: (predictions.predictions.len(), LABELS),
            right: (labels.len(), LABELS),
        });
    }
    let means = predictions.means();
    let raw_sigma = predictions.sigmas();
    let mut floored = 0;
    let sigmas: Vec<[f64; LABELS]> = raw_sigma
        .iter()
        .map(|s| {
            s.map(|v| {
                if v < SIGMA_EPS {
                    floored += 1;
                    SIGMA_EPS
                } else {
                    v
                }
            })
        })
        .collect();
    let (pooled, curve) = metric_set(&flatten(labels), &flatten(&means), &flatten(&sigmas))?;
    let per_output = (0..LABELS)
        .map(|j| metric_set(&column(labels, j), &column(&means, j), &column(&sigmas, j)).map(|r| r.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport {
        count: labels.len(),
        pooled,
        per_output,
        curve,
        clamped_sigma: predictions.clamped_sigma,
        floored_sigma: floored,
    })
}
