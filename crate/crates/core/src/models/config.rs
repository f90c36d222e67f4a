use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// The four model assemblies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SvdDngpa,
    Dngpa,
    Bnn,
    Dqr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::SvdDngpa, ModelKind::Dngpa, ModelKind::Bnn, ModelKind::Dqr];

    /// Default Adam step size. The GP kinds have a frozen or spectrally
    /// capped extractor and tolerate larger steps; an uncapped 7000-wide
    /// input layer does not.
    pub fn default_lr(self) -> f64 {
        if self.is_gp() {
            3e-3
        } else {
            1e-3
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SvdDngpa => "svd_dngpa",
            ModelKind::Dngpa => "dngpa",
            ModelKind::Bnn => "bnn",
            ModelKind::Dqr => "dqr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown model kind '{s}'")))
    }

    /// Kinds with a GP variance head.
    pub fn is_gp(self) -> bool {
        matches!(self, ModelKind::SvdDngpa | ModelKind::Dngpa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
}

/// Default multiple of the median latent distance used as the initial
/// lengthscale. At one median the RFF map is too rough for the linear head
/// to fit in the default epoch budget.
pub const MEDIAN_SCALE: f64 = 2.0;

/// Initial RFF lengthscale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthscaleInit {
    /// Multiple of the median pairwise distance of the initial latent
    /// codes of the training set.
    Median(f64),
    Fixed(f64),
}

/// Architecture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    pub optimizer: Optimizer,
    pub latent_dim: usize,
    pub rff_features: usize,
    pub activation: Activation,
    pub residual_blocks: usize,
    pub dropout_rate: f64,
    /// Spectral cap of the residual Dense layers (GP kinds).
    pub resnet_sn: f64,
    /// Spectral cap of the input Dense layer (plain DNGPA only).
    pub input_sn: f64,
    pub lengthscale_init: LengthscaleInit,
    /// Initial GP noise σ_n in normalised label units.
    pub noise_init: f64,
    /// Rows used by the median lengthscale heuristic.
    pub median_rows: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Adam,
            latent_dim: 64,
            rff_features: 128,
            activation: Activation::Relu,
            residual_blocks: 5,
            dropout_rate: 0.1,
            resnet_sn: 0.8,
            input_sn: 1.2,
            lengthscale_init: LengthscaleInit::Median(MEDIAN_SCALE),
            noise_init: 0.1,
            median_rows: 256,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.latent_dim == 0 || self.rff_features == 0 {
            return bad("latent_dim and rff_features must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.resnet_sn > 0.0 && self.input_sn > 0.0) {
            return bad("spectral caps must be positive");
        }
        if !(self.noise_init > 0.0) {
            return bad("noise_init must be positive");
        }
        let (LengthscaleInit::Fixed(l) | LengthscaleInit::Median(l)) = self.lengthscale_init;
        if !(l > 0.0 && l.is_finite()) {
            return bad("lengthscale init must be positive");
        }
        if self.median_rows < 2 {
            return bad("median_rows must be at least 2");
        }
        Ok(())
    }
}

/// Adam settings of a run. `lr: None` selects [`ModelKind::default_lr`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self {
            lr: None,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        }
    }
}

impl OptimizerConfig {
    pub fn resolve(&self, kind: ModelKind) -> AdamConfig {
        AdamConfig {
            lr: self.lr.unwrap_or(kind.default_lr()),
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Training schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: OptimizerConfig,
    /// Early-stopping patience in epochs on the ID-test loss; 0 disables it.
    pub patience: usize,
    /// Lower bound on σ in the Gaussian NLL.
    pub sigma_floor: f64,
    /// Monte Carlo passes at prediction time (BNN).
    pub mc_passes: usize,
    /// Relaxed-dropout passes per batch when training the BNN.
    pub mc_train_passes: usize,
    pub ensemble_size: usize,
    /// Share of members that must train without diverging for an ensemble
    /// report (rounded up: 12 of 15 by default).
    pub ensemble_min_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            adam: OptimizerConfig::default(),
            patience: 25,
            sigma_floor: crate::nn::SIGMA_FLOOR,
            mc_passes: 50,
            mc_train_passes: 8,
            ensemble_size: 15,
            ensemble_min_fraction: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Surviving members required for an ensemble of `n`.
    pub fn min_survivors(&self, n: usize) -> usize {
        (libm::ceil(self.ensemble_min_fraction * n as f64 - 1e-9) as usize).clamp(1, n.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.mc_passes == 0 || self.mc_train_passes < 2 {
            return Err(Error::InvalidParameter(
                "epochs, batch_size and mc_passes must be positive and mc_train_passes >= 2".into(),
            ));
        }
        if self.ensemble_size == 0 || !(self.ensemble_min_fraction > 0.0 && self.ensemble_min_fraction <= 1.0) {
            return Err(Error::InvalidParameter(
                "ensemble_size must be positive and ensemble_min_fraction in (0, 1]".into(),
            ));
        }
        if self.adam.lr.is_some_and(|lr| !(lr > 0.0)) || !(self.sigma_floor > 0.0) {
            return Err(Error::InvalidParameter("learning rate and sigma_floor must be positive".into()));
        }
        Ok(())
    }
}
