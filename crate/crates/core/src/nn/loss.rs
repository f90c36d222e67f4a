use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Quantile levels of the quantile-regression head, low to high.
pub const QUANTILES: [f64; 3] = [0.159, 0.5, 0.841];

/// Default lower bound on σ in the Gaussian NLL (normalised label units).
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Pinball loss `max(τ r, (τ − 1) r)` of a residual `r = y − ŷ`.
pub fn pinball(r: f64, tau: f64) -> f64 {
    (tau * r).max((tau - 1.0) * r)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!("quantile level {tau} outside (0, 1)")));
    }
    Ok(())
}

/// Mean pinball loss of one quantile over paired values.
pub fn pinball_loss(y: &[f64], yhat: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::DimensionMismatch {
            op: "pinball_loss",
            left: (y.len(), 1),
            right: (yhat.len(), 1),
        });
    }
    Ok(y.iter().zip(yhat).map(|(a, b)| pinball(a - b, tau)).sum::<f64>() / y.len() as f64)
}

/// Pinball loss averaged over samples, outputs and quantiles.
/// `pred` is `n × (q·k)` with quantile `q` of output `j` in column `q·k + j`;
/// `y` is `n × k`. Returns the loss and `∂loss/∂pred` (0 at `y = ŷ`).
pub fn quantile_loss(y: &Matrix, pred: &Matrix, taus: &[f64]) -> Result<(f64, Matrix)> {
    for &t in taus {
        check_tau(t)?;
    }
    let (n, k) = y.shape();
    if pred.shape() != (n, k * taus.len()) || n == 0 {
        return Err(Error::DimensionMismatch {
            op: "quantile_loss",
            left: y.shape(),
            right: pred.shape(),
        });
    }
    let count = (n * k * taus.len()) as f64;
    let mut grad = Matrix::zeros(n, pred.cols());
    let mut total = 0.0;
    for i in 0..n {
        for (q, &tau) in taus.iter().enumerate() {
            for j in 0..k {
                let col = q * k + j;
                let r = y.get(i, j) - pred.get(i, col);
                total += pinball(r, tau);
                let g = if r > 0.0 {
                    -tau
                } else if r < 0.0 {
                    1.0 - tau
                } else {
                    0.0
                };
                grad.set(i, col, g / count);
            }
        }
    }
    Ok((total / count, grad))
}

/// Value and gradients of the Gaussian negative log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct NllOutput {
    pub value: f64,
    pub d_mean: Matrix,
    pub d_sigma: Matrix,
}

/// `(1/N) Σ_i Σ_j [ (y − ŷ)² / (2σ²) + ln(σ²) / 2 ]` with `σ` clamped below
/// at `floor`; the σ gradient is zero where the clamp is active.
pub fn gaussian_nll(y: &Matrix, mean: &Matrix, sigma: &Matrix, floor: f64) -> Result<NllOutput> {
    if y.shape() != mean.shape() || y.shape() != sigma.shape() || y.rows() == 0 {
        return Err(Error::DimensionMismatch {
            op: "gaussian_nll",
            left: y.shape(),
            right: mean.shape(),
        });
    }
    if !(y.is_finite() && mean.is_finite() && sigma.is_finite()) {
        return Err(Error::NonFinite("gaussian_nll input"));
    }
    let n = y.rows() as f64;
    let (mut d_mean, mut d_sigma) = (Matrix::zeros(y.rows(), y.cols()), Matrix::zeros(y.rows(), y.cols()));
    let mut total = 0.0;
    let entries = y.as_slice().iter().zip(mean.as_slice()).zip(sigma.as_slice());
    for (((&yi, &mi), &si), (dm, ds)) in entries.zip(d_mean.as_mut_slice().iter_mut().zip(d_sigma.as_mut_slice())) {
        let s = si.max(floor);
        let r = yi - mi;
        total += r * r / (2.0 * s * s) + libm::log(s * s) / 2.0;
        *dm = -r / (s * s) / n;
        if si > floor {
            *ds = (1.0 / s - r * r / (s * s * s)) / n;
        }
    }
    Ok(NllOutput {
        value: total / n,
        d_mean,
        d_sigma,
    })
}
