use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::LABELS;

/// RMSE of the samples sharing one capacitance triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodCell {
    pub caps: [f64; LABELS],
    pub count: usize,
    pub rmse: f64,
}

/// Per-triplet errors over a grid plus the corner aggregates: `near` is
/// the cell with every capacitor at the largest grid value, `far` the cell
/// with every capacitor at the smallest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodGridReport {
    pub cells: Vec<OodCell>,
    pub near: f64,
    pub far: f64,
}

/// Groups predictions by their label triplet over the full
/// `grid_values³` grid, in lexicographic triplet order.
pub fn ood_rmse_grid(
    means: &[[f64; LABELS]],
    labels: &[[f64; LABELS]],
    grid_values: &[f64],
) -> Result<OodGridReport> {
    if means.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            op: "ood_rmse_grid",
            left: (means.len(), LABELS),
            right: (labels.len(), LABELS),
        });
    }
    let mut values = grid_values.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.is_empty() {
        return Err(Error::EmptyPartition("ood_rmse_grid"));
    }
    let g = values.len();
    let slot = |c: f64| values.iter().position(|&v| (v - c).abs() <= 1e-6 * v.abs().max(1.0));
    let mut sums = alloc::vec![(0usize, 0.0f64); g * g * g];
    for (m, l) in means.iter().zip(labels) {
        let idx = l.iter().try_fold(0, |acc, &c| slot(c).map(|s| acc * g + s));
        let Some(idx) = idx else {
            return Err(Error::InvalidParameter(alloc::format!("label {l:?} is off the grid")));
        };
        sums[idx].0 += 1;
        sums[idx].1 += m.iter().zip(l).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let mut cells = Vec::with_capacity(sums.len());
    for (idx, &(count, sq)) in sums.iter().enumerate() {
        let caps = [values[idx / (g * g)], values[(idx / g) % g], values[idx % g]];
        if count == 0 {
            return Err(Error::InvalidParameter(alloc::format!("grid cell {caps:?} has no samples")));
        }
        cells.push(OodCell {
            caps,
            count,
            rmse: libm::sqrt(sq / (count * LABELS) as f64),
        });
    }
    let far = cells[0].rmse;
    let near = cells[cells.len() - 1].rmse;
    Ok(OodGridReport { cells, near, far })
}
