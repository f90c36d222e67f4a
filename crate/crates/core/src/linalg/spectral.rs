use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::norm;
use super::Matrix;

/// Persistent left/right vectors of the power iteration. Owned by the layer
/// whose weights are being normalised so each training step needs a single
/// iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerIterState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PowerIterState {
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let mut unit = |n: usize| {
            let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let s = norm(&x);
            x.iter_mut().for_each(|v| *v /= s);
            x
        };
        let u = unit(rows);
        let v = unit(cols);
        Self { u, v }
    }

    /// `uᵀ W v` for the current vectors.
    pub fn rayleigh(&self, w: &Matrix) -> f64 {
        let mut s = 0.0;
        for (i, ui) in self.u.iter().enumerate() {
            let row = w.row(i);
            s += ui * row.iter().zip(&self.v).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }
}

/// Estimates the largest singular value of `w`, updating `state` in place.
/// The estimate `||W v||` never exceeds the true value.
pub fn spectral_norm_power_iteration(w: &Matrix, state: &mut PowerIterState, iters: usize) -> f64 {
    let (r, c) = w.shape();
    debug_assert_eq!(state.u.len(), r);
    debug_assert_eq!(state.v.len(), c);
    let mut v = alloc::vec![0.0; c];
    let mut u = alloc::vec![0.0; r];
    let mut sigma = 0.0;
    for _ in 0..iters.max(1) {
        // v <- Wᵀu / |Wᵀu|
        v.iter_mut().for_each(|x| *x = 0.0);
        for (i, ui) in state.u.iter().enumerate() {
            for (vj, wij) in v.iter_mut().zip(w.row(i)) {
                *vj += ui * wij;
            }
        }
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        // u <- W v / |W v|
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = w.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        sigma = norm(&u);
        if sigma == 0.0 {
            return 0.0;
        }
        u.iter_mut().for_each(|x| *x /= sigma);
        state.u.copy_from_slice(&u);
        state.v.copy_from_slice(&v);
    }
    sigma
}
