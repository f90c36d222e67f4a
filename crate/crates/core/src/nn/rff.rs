use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::init::{sigmoid, softplus, softplus_inv};
use super::param::Param;
use crate::error::{Error, Result};
use crate::linalg::{gemm_into, mul, Matrix};

/// Random Fourier features `φ(x) = sqrt(2/D) cos(x W / λ + b)` approximating
/// the RBF kernel `exp(−|x − y|² / (2λ²))`. `W` and `b` are frozen; the
/// lengthscale `λ = softplus(ρ)` is trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct RffLayer {
    /// `in × D`, entries N(0, 1).
    pub w: Matrix,
    /// Phases, Uniform[0, 2π).
    pub b: Vec<f64>,
    pub rho: Param,
}

/// Pre-activation kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RffCache {
    z: Matrix,
}

impl RffLayer {
    pub fn new<R: Rng + ?Sized>(input: usize, features: usize, lengthscale: f64, rng: &mut R) -> Self {
        let w = Matrix::from_fn(input, features, |_, _| StandardNormal.sample(rng));
        let b = (0..features).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self {
            w,
            b,
            rho: Param::scalar(softplus_inv(lengthscale)),
        }
    }

    pub fn features(&self) -> usize {
        self.w.cols()
    }

    pub fn lengthscale(&self) -> f64 {
        softplus(self.rho.get())
    }

    pub fn set_lengthscale(&mut self, lengthscale: f64) {
        self.rho.value.as_mut_slice()[0] = softplus_inv(lengthscale);
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, RffCache)> {
        if x.cols() != self.w.rows() {
            return Err(Error::DimensionMismatch {
                op: "rff_forward",
                left: x.shape(),
                right: self.w.shape(),
            });
        }
        let d = self.features();
        let mut z = Matrix::zeros(x.rows(), d);
        gemm_into(1.0 / self.lengthscale(), x.view(), self.w.view(), 0.0, z.as_mut_slice());
        for row in z.as_mut_slice().chunks_exact_mut(d) {
            row.iter_mut().zip(&self.b).for_each(|(v, b)| *v += b);
        }
        let amp = libm::sqrt(2.0 / d as f64);
        let mut phi = z.clone();
        phi.as_mut_slice().iter_mut().for_each(|v| *v = amp * libm::cos(*v));
        Ok((phi, RffCache { z }))
    }

    /// Accumulates the lengthscale gradient and returns `dx`.
    pub fn backward(&mut self, cache: &RffCache, dphi: &Matrix) -> Matrix {
        let d = self.features();
        let lambda = self.lengthscale();
        let amp = libm::sqrt(2.0 / d as f64);
        let mut dz = dphi.clone();
        let mut dlambda = 0.0;
        for (row, zrow) in dz.as_mut_slice().chunks_exact_mut(d).zip(cache.z.as_slice().chunks_exact(d)) {
            for ((g, &z), b) in row.iter_mut().zip(zrow).zip(&self.b) {
                *g *= -amp * libm::sin(z);
                // z − b = x W / λ
                dlambda -= *g * (z - b) / lambda;
            }
        }
        self.rho.grad.as_mut_slice()[0] += dlambda * sigmoid(self.rho.get());
        let mut dx = mul(dz.view(), self.w.t());
        dx.scale(1.0 / lambda);
        dx
    }
}

/// Exact RBF kernel `exp(−|x − y|² / (2λ²))`.
pub fn rbf_kernel(x: &[f64], y: &[f64], lengthscale: f64) -> f64 {
    let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    libm::exp(-sq / (2.0 * lengthscale * lengthscale))
}
