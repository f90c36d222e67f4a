//! Minimal network engine: layers with hand-written backward passes,
//! losses, Adam and a finite-difference checker.

mod dropout;
mod gradcheck;
mod init;
mod linear;
mod loss;
mod param;
mod residual;
mod rff;


pub use dropout::{
    concrete_dropout_backward, concrete_dropout_forward, dropout_backward, dropout_forward, ConcreteCache,
    ConcreteDropout, Mode, CONCRETE_TEMPERATURE,
};
pub use gradcheck::{finite_difference_check, numerical_gradient, FD_STEP, REL_FLOOR};
pub use init::{glorot_uniform, he_uniform, sigmoid, softplus, softplus_inv};
pub use linear::{
    dense_backward, dense_forward, relu, relu_backward, Dense, DenseGrads, FrozenProjection, Linear,
    SpectralDense, POWER_WARMUP,
};
pub use loss::{gaussian_nll, pinball, pinball_loss, quantile_loss, NllOutput, QUANTILES, SIGMA_FLOOR};
pub use param::{adam_step, AdamConfig, AdamState, Param};
pub use residual::{BlockCache, BlockDropout, ResidualBlock};
pub use rff::{rbf_kernel, RffCache, RffLayer};
