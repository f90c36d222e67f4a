use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::LABELS;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-column z-score statistics for features and labels, fitted on the
/// training partition only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub label_mean: [f64; LABELS],
    pub label_std: [f64; LABELS],
}

fn column_stats(n: usize, width: usize, value: impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; width];
    let mut lo = vec![f64::INFINITY; width];
    let mut hi = vec![f64::NEG_INFINITY; width];
    for i in 0..n {
        for j in 0..width {
            let v = value(i, j);
            mean[j] += v;
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; width];
    for i in 0..n {
        for j in 0..width {
            let d = value(i, j) - mean[j];
            var[j] += d * d;
        }
    }
    let mut std = Vec::with_capacity(width);
    for j in 0..width {
        if lo[j] == hi[j] {
            // constant column: exact mean so the transform yields exactly 0
            mean[j] = lo[j];
            std.push(STD_FLOOR);
        } else {
            std.push(libm::sqrt(var[j] / n as f64).max(STD_FLOOR));
        }
    }
    (mean, std)
}

impl ScalerStats {
    /// Fits on row-major `features` (`labels.len()` rows of `width`).
    pub fn fit<T: Copy + Into<f64>>(
        features: &[T],
        width: usize,
        labels: &[[f64; LABELS]],
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 || width == 0 {
            return Err(Error::EmptyPartition("train"));
        }
        if features.len() != n * width {
            return Err(Error::DimensionMismatch {
                op: "scaler_fit",
                left: (features.len() / width, width),
                right: (n, LABELS),
            });
        }
        let (feature_mean, feature_std) =
            column_stats(n, width, |i, j| features[i * width + j].into());
        let (lm, ls) = column_stats(n, LABELS, |i, j| labels[i][j]);
        Ok(Self {
            feature_mean,
            feature_std,
            label_mean: [lm[0], lm[1], lm[2]],
            label_std: [ls[0], ls[1], ls[2]],
        })
    }

    pub fn width(&self) -> usize {
        self.feature_mean.len()
    }

    pub fn apply_features<T: Copy + Into<f64>>(&self, features: &[T]) -> Result<Matrix> {
        let w = self.width();
        if !features.len().is_multiple_of(w) {
            return Err(Error::DimensionMismatch {
                op: "scaler_apply",
                left: (features.len(), 1),
                right: (1, w),
            });
        }
        let rows = features.len() / w;
        let mut out = Matrix::zeros(rows, w);
        for (o, (i, v)) in out.as_mut_slice().iter_mut().zip(features.iter().enumerate()) {
            let j = i % w;
            *o = ((*v).into() - self.feature_mean[j]) / self.feature_std[j];
        }
        Ok(out)
    }

    pub fn invert_features(&self, x: &Matrix) -> Matrix {
        let w = self.width();
        let mut out = x.clone();
        for (i, v) in out.as_mut_slice().iter_mut().enumerate() {
            let j = i % w;
            *v = *v * self.feature_std[j] + self.feature_mean[j];
        }
        out
    }

    pub fn apply_labels(&self, labels: &[[f64; LABELS]]) -> Matrix {
        Matrix::from_fn(labels.len(), LABELS, |i, j| {
            (labels[i][j] - self.label_mean[j]) / self.label_std[j]
        })
    }

    pub fn invert_label(&self, z: &[f64]) -> [f64; LABELS] {
        core::array::from_fn(|j| z[j] * self.label_std[j] + self.label_mean[j])
    }

    pub fn invert_sigma(&self, s: &[f64]) -> [f64; LABELS] {
        core::array::from_fn(|j| s[j] * self.label_std[j])
    }
}
