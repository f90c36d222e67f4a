//! Dense linear algebra in `f64`: products, symmetric eigen-decomposition,
//! truncated SVD with its norm bounds, power-iteration spectral norms,
//! Cholesky factors and pairwise-distance statistics.

mod cholesky;
mod distance;
mod eigen;
mod matrix;
mod spectral;
mod svd;

pub use cholesky::Cholesky;
pub use distance::{
    distances_for_pairs, pairwise_distances, pearson_correlation, ranks, sample_pairs,
    spearman_correlation,
};
pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::{dot, gemm_into, matmul, mul, norm, MatRef, Matrix};
pub use spectral::{spectral_norm_power_iteration, PowerIterState};
pub use svd::{
    expected_norm_degradation, norm_preservation_bound, truncated_svd, truncated_svd_with,
    SvdBasis, SvdOptions,
};
