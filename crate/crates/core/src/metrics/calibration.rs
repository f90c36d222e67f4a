use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of expected-proportion levels.
pub const CALIBRATION_LEVELS: usize = 100;

/// Observed against expected quantile coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub expected: Vec<f64>,
    pub observed: Vec<f64>,
    pub rmsce: f64,
    pub mace: f64,
    pub miscalibration_area: f64,
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// `m` evenly spaced levels from 0.01 to 0.99.
pub fn calibration_grid(m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => alloc::vec![0.5],
        _ => (0..m).map(|i| 0.01 + 0.98 * i as f64 / (m - 1) as f64).collect(),
    }
}

/// Each observation's quantile level `q_i = Φ((y_i − μ_i) / σ_i)`;
/// `observed(p)` is the share of `q_i ≤ p`.
pub fn calibration_curve(y: &[f64], mu: &[f64], sigma: &[f64], m: usize) -> Result<CalibrationCurve> {
    if y.len() != mu.len() || y.len() != sigma.len() {
        return Err(Error::DimensionMismatch {
            op: "calibration_curve",
            left: (y.len(), 1),
            right: (mu.len(), sigma.len()),
        });
    }
    if y.is_empty() || m == 0 {
        return Err(Error::EmptyPartition("calibration_curve"));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("calibration_curve needs sigma > 0".into()));
    }
    let mut q: Vec<f64> = y
        .iter()
        .zip(mu)
        .zip(sigma)
        .map(|((y, m), s)| normal_cdf((y - m) / s))
        .collect();
    q.sort_by(f64::total_cmp);
    let n = q.len() as f64;
    let expected = calibration_grid(m);
    let observed: Vec<f64> = expected
        .iter()
        .map(|&p| q.partition_point(|&v| v <= p) as f64 / n)
        .collect();
    let gaps: Vec<f64> = observed.iter().zip(&expected).map(|(o, p)| (o - p).abs()).collect();
    let mace = gaps.iter().sum::<f64>() / m as f64;
    let rmsce = libm::sqrt(gaps.iter().map(|g| g * g).sum::<f64>() / m as f64);
    let miscalibration_area = expected
        .windows(2)
        .zip(gaps.windows(2))
        .map(|(p, g)| 0.5 * (g[0] + g[1]) * (p[1] - p[0]))
        .sum();
    Ok(CalibrationCurve {
        expected,
        observed,
        rmsce,
        mace,
        miscalibration_area,
    })
}
