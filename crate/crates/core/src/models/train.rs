use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::assembly::{ModelAssembly, TrunkCache};
use super::config::{ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{gaussian_nll, quantile_loss, AdamState, Mode, QUANTILES};
use crate::rng::{rng_for, stream};
use crate::simgen::{Dataset, Split};

/// Standardised training and early-stopping data.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub x_train: &'a Matrix,
    pub y_train: &'a Matrix,
    pub x_test: &'a Matrix,
    pub y_test: &'a Matrix,
}

/// One row of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub lengthscale: f64,
    pub noise: Option<f64>,
    pub dropout_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Per-entry σ matrix with one shared value per row.
fn broadcast(sigma: &[f64], cols: usize) -> Matrix {
    Matrix::from_fn(sigma.len(), cols, |i, _| sigma[i])
}

/// Mean and population standard deviation over passes, per entry.
fn scaled(a: &Matrix, c: f64) -> Matrix {
    let mut out = a.clone();
    out.scale(c);
    out
}

pub(crate) fn pass_moments(outs: &[Matrix]) -> (Matrix, Matrix) {
    let (rows, cols) = outs[0].shape();
    let m = outs.len() as f64;
    let mut mean = outs[0].clone();
    let mut std = Matrix::zeros(rows, cols);
    for k in 0..rows * cols {
        // shift by the first pass so identical passes give exactly zero spread
        let base = outs[0].as_slice()[k];
        let shift = outs.iter().map(|o| o.as_slice()[k] - base).sum::<f64>() / m;
        let mu = base + shift;
        let var = outs.iter().map(|o| (o.as_slice()[k] - mu) * (o.as_slice()[k] - mu)).sum::<f64>() / m;
        mean.as_mut_slice()[k] = mu;
        std.as_mut_slice()[k] = libm::sqrt(var);
    }
    (mean, std)
}

impl ModelAssembly {
    /// Training objective on extractor output `z`. With `backward`, parameter
    /// gradients are accumulated and `∂loss/∂z` is returned. For the BNN, σ
    /// is the spread of the dropout passes and its gradient reaches only the
    /// dropout logit; the residual gradient reaches every parameter.
    pub fn objective<R: Rng + ?Sized>(
        &mut self,
        z: &Matrix,
        y: &Matrix,
        cfg: &TrainConfig,
        mode: Mode,
        backward: bool,
        rng: &mut R,
    ) -> Result<(f64, Option<Matrix>)> {
        match self.kind {
            ModelKind::SvdDngpa | ModelKind::Dngpa => {
                let (out, cache) = self.trunk_forward(z, mode, rng)?;
                let gp = self.gp.as_ref().expect("gp head");
                let (sigma, frozen) = gp.sigma_frozen(&cache.phi);
                let nll = gaussian_nll(y, &out, &broadcast(&sigma, y.cols()), cfg.sigma_floor)?;
                if !backward {
                    return Ok((nll.value, None));
                }
                let dsigma: Vec<f64> = (0..y.rows()).map(|i| nll.d_sigma.row(i).iter().sum()).collect();
                let dphi = self.gp.as_mut().expect("gp head").sigma_backward(&frozen, &dsigma);
                let dz = self.trunk_backward(&cache, &nll.d_mean, Some(&dphi));
                Ok((nll.value, Some(dz)))
            }
            ModelKind::Dqr => {
                let (out, cache) = self.trunk_forward(z, mode, rng)?;
                let (value, grad) = quantile_loss(y, &out, &QUANTILES)?;
                let dz = backward.then(|| self.trunk_backward(&cache, &grad, None));
                Ok((value, dz))
            }
            ModelKind::Bnn => {
                let passes = cfg.mc_train_passes;
                let mut outs = Vec::with_capacity(passes);
                let mut caches: Vec<TrunkCache> = Vec::with_capacity(passes);
                for _ in 0..passes {
                    let (out, cache) = self.trunk_forward(z, mode, rng)?;
                    outs.push(out);
                    caches.push(cache);
                }
                let (mean, std) = pass_moments(&outs);
                let nll = gaussian_nll(y, &mean, &std, cfg.sigma_floor)?;
                if !backward {
                    return Ok((nll.value, None));
                }
                let m = passes as f64;
                let mut dz = Matrix::zeros(z.rows(), z.cols());
                // the residual term trains every parameter
                let dmean = scaled(&nll.d_mean, 1.0 / m);
                for cache in &caches {
                    let d = self.trunk_backward(cache, &dmean, None);
                    dz.as_mut_slice().iter_mut().zip(d.as_slice()).for_each(|(a, b)| *a += b);
                }
                // the spread term only moves the dropout rate
                let kept: Vec<Matrix> = self.params_mut().iter().map(|p| p.grad.clone()).collect();
                for (out, cache) in outs.iter().zip(&caches) {
                    let mut dout = Matrix::zeros(y.rows(), y.cols());
                    for k in 0..dout.as_slice().len() {
                        let s = std.as_slice()[k];
                        if s > 0.0 {
                            dout.as_mut_slice()[k] =
                                nll.d_sigma.as_slice()[k] * (out.as_slice()[k] - mean.as_slice()[k]) / (m * s);
                        }
                    }
                    self.trunk_backward(cache, &dout, None);
                }
                let logit = self.dropout_logit.as_ref().map(|l| l.grad.clone());
                for (p, g) in self.params_mut().into_iter().zip(kept) {
                    p.grad = g;
                }
                if let (Some(l), Some(g)) = (&mut self.dropout_logit, logit) {
                    l.grad = g;
                }
                Ok((nll.value, Some(dz)))
            }
        }
    }

    /// Deterministic held-out loss: evaluation mode for the single-pass
    /// kinds, hard-mask passes from a fixed stream for the BNN.
    pub fn held_out_loss(&mut self, z: &Matrix, y: &Matrix, cfg: &TrainConfig) -> Result<f64> {
        let mut rng = rng_for(self.seed, stream::EVAL_DROPOUT);
        let mode = if self.kind == ModelKind::Bnn { Mode::Sample } else { Mode::Eval };
        Ok(self.objective(z, y, cfg, mode, false, &mut rng)?.0)
    }
}

/// Trains `model` in place. Each epoch ends with a GP-head refresh (GP
/// kinds) and an ID-test evaluation; the parameters of the epoch with the
/// lowest ID-test loss are kept.
pub fn train(model: &mut ModelAssembly, data: TrainData<'_>, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    let n = data.x_train.rows();
    if n == 0 || data.y_train.rows() != n || data.x_test.rows() != data.y_test.rows() {
        return Err(Error::EmptyPartition("training data"));
    }
    let mut shuffle = rng_for(model.seed, stream::SHUFFLE);
    let mut drop = rng_for(model.seed, stream::DROPOUT);
    let sizes: Vec<usize> = model.params_mut().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(&sizes);
    let adam_cfg = cfg.adam.resolve(model.kind);
    let frozen = model.extractor_is_frozen();
    let z_train = if frozen { Some(model.extract(data.x_train)?) } else { None };
    let z_test_frozen = if frozen { Some(model.extract(data.x_test)?) } else { None };

    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ModelAssembly)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let y = data.y_train.select_rows(idx);
            model.zero_grad();
            let (z, x) = match &z_train {
                Some(z) => (z.select_rows(idx), None),
                None => {
                    let x = data.x_train.select_rows(idx);
                    (model.extract(&x)?, Some(x))
                }
            };
            let (loss, dz) = model.objective(&z, &y, cfg, Mode::Train, true, &mut drop)?;
            if let (Some(x), Some(dz)) = (&x, &dz) {
                model.extractor.backward(x, dz, false);
            }
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            total += loss * idx.len() as f64;
            adam.step(&adam_cfg, &mut model.params_mut())?;
            model.power_step(1);
            if let Some(gp) = &mut model.gp {
                gp.mark_stale();
            }
        }
        let train_loss = total / n as f64;
        match &z_train {
            Some(z) => model.refresh_gp_from_extracted(z)?,
            None => model.refresh_gp(data.x_train)?,
        }
        let z_test = match &z_test_frozen {
            Some(z) => z.clone(),
            None => model.extract(data.x_test)?,
        };
        let test_loss = if z_test.rows() > 0 {
            model.held_out_loss(&z_test, data.y_test, cfg)?
        } else {
            train_loss
        };
        if !(train_loss.is_finite() && test_loss.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss,
            test_loss,
            lengthscale: model.rff.lengthscale(),
            noise: model.gp.as_ref().map(|g| g.noise()),
            dropout_p: model.dropout_rate(),
        });
        if best.as_ref().is_none_or(|(b, _, _)| test_loss < *b) {
            best = Some((test_loss, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (_, best_epoch, snapshot) = best.expect("at least one epoch");
    *model = snapshot;
    Ok(History {
        epochs: history,
        best_epoch,
        stopped_early,
    })
}

/// Standardised matrices of a dataset for [`train`].
pub struct PreparedData {
    pub x_train: Matrix,
    pub y_train: Matrix,
    pub x_test: Matrix,
    pub y_test: Matrix,
}

impl PreparedData {
    pub fn new(dataset: &Dataset) -> Self {
        Self {
            x_train: dataset.features(Split::Train),
            y_train: dataset.labels(Split::Train),
            x_test: dataset.features(Split::IdTest),
            y_test: dataset.labels(Split::IdTest),
        }
    }

    pub fn view(&self) -> TrainData<'_> {
        TrainData {
            x_train: &self.x_train,
            y_train: &self.y_train,
            x_test: &self.x_test,
            y_test: &self.y_test,
        }
    }
}
