use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{distances_for_pairs, pearson_correlation, sample_pairs, spearman_correlation, Matrix};
use crate::models::{ModelAssembly, Stage};

/// Input-space against latent-space distances over sampled row pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub stage: Stage,
    pub pearson: f64,
    pub spearman: f64,
    pub pairs: Vec<(usize, usize)>,
    pub input: Vec<f64>,
    pub latent: Vec<f64>,
}

/// Correlation between pairwise distances of `x` and of `h` (same rows).
pub fn distance_correlation(
    x: &Matrix,
    h: &Matrix,
    stage: Stage,
    pair_fraction: f64,
    seed: u64,
) -> Result<DistanceReport> {
    let pairs = sample_pairs(x.rows(), pair_fraction, seed)?;
    let input = distances_for_pairs(x, &pairs);
    let latent = distances_for_pairs(h, &pairs);
    Ok(DistanceReport {
        stage,
        pearson: pearson_correlation(&input, &latent)?,
        spearman: spearman_correlation(&input, &latent)?,
        pairs,
        input,
        latent,
    })
}

/// Distance preservation of a model's map from standardised inputs to the
/// chosen stage.
pub fn distance_report(
    model: &ModelAssembly,
    x: &Matrix,
    stage: Stage,
    pair_fraction: f64,
    seed: u64,
) -> Result<DistanceReport> {
    let h = model.latent(x, stage)?;
    distance_correlation(x, &h, stage, pair_fraction, seed)
}
