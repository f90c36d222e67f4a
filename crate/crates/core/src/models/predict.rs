use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::assembly::ModelAssembly;
use super::config::{ModelKind, TrainConfig};
use super::train::pass_moments;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::Mode;
use crate::rng::{rng_for, stream};
use crate::LABELS;

/// One sample's prediction in pF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: [f64; LABELS],
    pub sigma: [f64; LABELS],
    /// Quantile outputs `[q][output]` (quantile regression only).
    pub quantiles: Option<[[f64; LABELS]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub predictions: Vec<Prediction>,
    /// Quantile-regression outputs whose upper quantile fell below the lower
    /// one; their σ is clamped to 0.
    pub clamped_sigma: usize,
}

impl PredictionSet {
    pub fn means(&self) -> Vec<[f64; LABELS]> {
        self.predictions.iter().map(|p| p.mean).collect()
    }

    pub fn sigmas(&self) -> Vec<[f64; LABELS]> {
        self.predictions.iter().map(|p| p.sigma).collect()
    }
}

/// Predictions for standardised features `x`. The GP kinds and quantile
/// regression use one deterministic pass; the BNN averages `cfg.mc_passes`
/// hard-mask passes and reports their population standard deviation.
pub fn predict(model: &ModelAssembly, x: &Matrix, cfg: &TrainConfig) -> Result<PredictionSet> {
    if x.cols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "predict",
            left: x.shape(),
            right: (model.input_dim(), model.output_dim()),
        });
    }
    let z = model.extract(x)?;
    let mut rng = rng_for(model.seed, stream::PREDICT);
    let scaler = &model.scaler;
    let mut clamped = 0;
    let predictions = match model.kind {
        ModelKind::SvdDngpa | ModelKind::Dngpa => {
            let (out, cache) = model.trunk_forward(&z, Mode::Eval, &mut rng)?;
            let sigma = model.gp.as_ref().expect("gp head").sigma(&cache.phi)?;
            (0..x.rows())
                .map(|i| Prediction {
                    mean: scaler.invert_label(out.row(i)),
                    sigma: scaler.invert_sigma(&[sigma[i]; LABELS]),
                    quantiles: None,
                })
                .collect()
        }
        ModelKind::Dqr => {
            let (out, _) = model.trunk_forward(&z, Mode::Eval, &mut rng)?;
            (0..x.rows())
                .map(|i| {
                    let row = out.row(i);
                    let q = |k: usize| scaler.invert_label(&row[k * LABELS..(k + 1) * LABELS]);
                    let quantiles = [q(0), q(1), q(2)];
                    let mut sigma = [0.0; LABELS];
                    for j in 0..LABELS {
                        // mean of (median − low) and (high − median) in normalised units
                        let s = 0.5 * (row[2 * LABELS + j] - row[j]);
                        if s < 0.0 {
                            clamped += 1;
                        }
                        sigma[j] = s.max(0.0);
                    }
                    Prediction {
                        mean: quantiles[1],
                        sigma: scaler.invert_sigma(&sigma),
                        quantiles: Some(quantiles),
                    }
                })
                .collect()
        }
        ModelKind::Bnn => {
            let outs = (0..cfg.mc_passes)
                .map(|_| model.trunk_forward(&z, Mode::Sample, &mut rng).map(|r| r.0))
                .collect::<Result<Vec<_>>>()?;
            let (mean, std) = pass_moments(&outs);
            (0..x.rows())
                .map(|i| Prediction {
                    mean: scaler.invert_label(mean.row(i)),
                    sigma: scaler.invert_sigma(std.row(i)),
                    quantiles: None,
                })
                .collect()
        }
    };
    Ok(PredictionSet {
        predictions,
        clamped_sigma: clamped,
    })
}
