//! Model assemblies (SVD-DNGPA, DNGPA, MC-dropout BNN, quantile regression),
//! the GP variance head, training, prediction and ensembles.

mod assembly;
mod config;
mod gp;
mod predict;
mod train;

pub use assembly::{
    build_model, build_model_for, median_distance, ModelAssembly, ModelMeta, Stage, Tensor, TrunkCache,
    SVD_OVERSAMPLE,
};
pub use config::{Activation, ArchConfig, LengthscaleInit, ModelKind, Optimizer, OptimizerConfig, TrainConfig, MEDIAN_SCALE};
pub use gp::{gp_posterior_sigma, FrozenSigma, GpHead};
pub use predict::{predict, Prediction, PredictionSet};
pub use train::{train, EpochRecord, History, PreparedData, TrainData};
