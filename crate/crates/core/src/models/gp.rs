use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{gemm_into, mul, Cholesky, Matrix};
use crate::nn::{sigmoid, softplus, softplus_inv, Param};

/// GP variance head over RFF features: precision `Λ = ΦᵀΦ + σ_n² I` of the
/// training features and its Cholesky factor. Posterior variance of a
/// test feature vector `φ` is `σ_n² φᵀ Λ⁻¹ φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHead {
    /// `σ_n = softplus(noise_raw)`.
    pub noise_raw: Param,
    precision: Matrix,
    factor: Cholesky,
    inverse: Matrix,
    stale: bool,
}

impl GpHead {
    /// Head with no training rows (`Λ = σ_n² I`).
    pub fn new(features: usize, noise: f64) -> Result<Self> {
        let mut head = Self {
            noise_raw: Param::scalar(softplus_inv(noise)),
            precision: Matrix::zeros(0, 0),
            factor: Cholesky::factor(&Matrix::identity(1))?,
            inverse: Matrix::zeros(0, 0),
            stale: true,
        };
        head.refresh(&Matrix::zeros(0, features))?;
        Ok(head)
    }

    /// Rebuilds from a stored precision matrix.
    pub fn from_precision(noise_raw: f64, precision: Matrix) -> Result<Self> {
        let mut head = Self {
            noise_raw: Param::scalar(noise_raw),
            factor: Cholesky::factor(&precision)?,
            precision,
            inverse: Matrix::zeros(0, 0),
            stale: false,
        };
        head.inverse = head.factor.inverse();
        Ok(head)
    }

    pub fn noise(&self) -> f64 {
        softplus(self.noise_raw.get())
    }

    pub fn features(&self) -> usize {
        self.precision.rows()
    }

    pub fn precision(&self) -> &Matrix {
        &self.precision
    }

    pub fn is_stale(&self) -> bool {
        self.stale
    }

    /// Flags the factor as out of date (weights, λ or σ_n changed).
    pub fn mark_stale(&mut self) {
        self.stale = true;
    }

    /// Recomputes `Λ`, its factor and inverse from training features `Φ`.
    pub fn refresh(&mut self, phi: &Matrix) -> Result<()> {
        let d = phi.cols();
        let mut lam = Matrix::identity(d);
        let s2 = self.noise() * self.noise();
        lam.scale(s2);
        gemm_into(1.0, phi.t(), phi.view(), 1.0, lam.as_mut_slice());
        // symmetrise against rounding in the product
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (lam.get(i, j) + lam.get(j, i));
                lam.set(i, j, v);
                lam.set(j, i, v);
            }
        }
        if !lam.is_finite() {
            return Err(Error::NonFinite("GP precision matrix"));
        }
        self.factor = Cholesky::factor(&lam)?;
        self.inverse = self.factor.inverse();
        self.precision = lam;
        self.stale = false;
        Ok(())
    }

    /// Posterior standard deviations `σ_n |L⁻¹ φ_i|` for each row of `phi`.
    pub fn sigma(&self, phi: &Matrix) -> Result<Vec<f64>> {
        if self.stale {
            return Err(Error::StaleFactor);
        }
        if phi.cols() != self.features() {
            return Err(Error::DimensionMismatch {
                op: "gp_sigma",
                left: phi.shape(),
                right: self.precision.shape(),
            });
        }
        let noise = self.noise();
        Ok((0..phi.rows())
            .map(|i| {
                let z = self.factor.solve_lower(phi.row(i));
                noise * libm::sqrt(z.iter().map(|v| v * v).sum::<f64>())
            })
            .collect())
    }

    /// Training-time variant using the epoch-frozen inverse. Returns per-row
    /// `σ_i` and the pieces needed by [`GpHead::sigma_backward`].
    pub fn sigma_frozen(&self, phi: &Matrix) -> (Vec<f64>, FrozenSigma) {
        let p = mul(phi.view(), self.inverse.view());
        let noise = self.noise();
        let quad: Vec<f64> = (0..phi.rows())
            .map(|i| phi.row(i).iter().zip(p.row(i)).map(|(a, b)| a * b).sum::<f64>().max(0.0))
            .collect();
        let sigma = quad.iter().map(|q| noise * libm::sqrt(*q)).collect();
        (sigma, FrozenSigma { p, quad })
    }

    /// Given `∂L/∂σ_i`, accumulates the σ_n gradient and returns `∂L/∂φ`.
    pub fn sigma_backward(&mut self, cache: &FrozenSigma, dsigma: &[f64]) -> Matrix {
        let noise = self.noise();
        let mut dphi = cache.p.clone();
        let mut dnoise = 0.0;
        for (i, (&g, &q)) in dsigma.iter().zip(&cache.quad).enumerate() {
            let s = libm::sqrt(q);
            dnoise += g * s;
            // ∂σ/∂φ = σ_n Λ⁻¹φ / sqrt(φᵀΛ⁻¹φ)
            let c = if s > 0.0 { g * noise / s } else { 0.0 };
            dphi.row_mut(i).iter_mut().for_each(|v| *v *= c);
        }
        self.noise_raw.grad.as_mut_slice()[0] += dnoise * sigmoid(self.noise_raw.get());
        dphi
    }
}

/// Saved products of [`GpHead::sigma_frozen`].
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenSigma {
    p: Matrix,
    quad: Vec<f64>,
}

/// Posterior standard deviation of one RFF vector.
pub fn gp_posterior_sigma(head: &GpHead, phi_star: &[f64]) -> Result<f64> {
    let m = Matrix::from_vec(1, phi_star.len(), phi_star.to_vec())?;
    Ok(head.sigma(&m)?[0])
}
