use rand::Rng;

use super::init::sigmoid;
use super::param::Param;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// How stochastic layers behave during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Deterministic inference: dropout is the identity.
    Eval,
    /// Training: inverted dropout, relaxed masks for concrete dropout.
    Train,
    /// Monte Carlo inference: hard masks everywhere.
    Sample,
}

/// Temperature of the concrete relaxation.
pub const CONCRETE_TEMPERATURE: f64 = 0.1;

fn multiply(x: &Matrix, factor: &Matrix) -> Matrix {
    let mut y = x.clone();
    y.as_mut_slice().iter_mut().zip(factor.as_slice()).for_each(|(a, b)| *a *= b);
    y
}

/// Inverted dropout. Returns the output and the multiplicative mask, or
/// `None` when the layer acts as the identity.
pub fn dropout_forward<R: Rng + ?Sized>(
    x: &Matrix,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Matrix, Option<Matrix>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(alloc::format!("dropout rate {p} outside [0, 1)")));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Matrix::from_fn(x.rows(), x.cols(), |_, _| {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    });
    Ok((multiply(x, &mask), Some(mask)))
}

pub fn dropout_backward(mask: Option<&Matrix>, dy: &Matrix) -> Matrix {
    match mask {
        Some(m) => multiply(dy, m),
        None => dy.clone(),
    }
}

/// Saved state of a concrete-dropout pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteCache {
    /// Multiplicative factor applied to the input.
    pub factor: Matrix,
    /// Derivative of `factor` with respect to the logit.
    pub dfactor: Matrix,
}

/// Dropout with rate `p = sigmoid(logit)`. Training uses the concrete
/// relaxation `z = sigmoid((logit + ln u − ln(1−u)) / t)` and scales kept
/// units by `(1 − z) / (1 − p)`; sampling draws hard Bernoulli masks.
pub fn concrete_dropout_forward<R: Rng + ?Sized>(
    x: &Matrix,
    logit: f64,
    temperature: f64,
    mode: Mode,
    rng: &mut R,
) -> (Matrix, Option<ConcreteCache>) {
    let p = sigmoid(logit);
    let (rows, cols) = x.shape();
    match mode {
        Mode::Eval => (x.clone(), None),
        Mode::Sample => {
            let keep = 1.0 / (1.0 - p);
            let factor = Matrix::from_fn(rows, cols, |_, _| if rng.random::<f64>() < p { 0.0 } else { keep });
            let y = multiply(x, &factor);
            (y, Some(ConcreteCache { factor, dfactor: Matrix::zeros(rows, cols) }))
        }
        Mode::Train => {
            let mut factor = Matrix::zeros(rows, cols);
            let mut dfactor = Matrix::zeros(rows, cols);
            for (f, df) in factor.as_mut_slice().iter_mut().zip(dfactor.as_mut_slice()) {
                let u: f64 = rng.random::<f64>().clamp(1e-7, 1.0 - 1e-7);
                let z = sigmoid((logit + libm::log(u) - libm::log1p(-u)) / temperature);
                *f = (1.0 - z) / (1.0 - p);
                *df = -z * (1.0 - z) / (temperature * (1.0 - p)) + (1.0 - z) * p / (1.0 - p);
            }
            let y = multiply(x, &factor);
            (y, Some(ConcreteCache { factor, dfactor }))
        }
    }
}

/// Returns `dx` and the gradient with respect to the logit.
pub fn concrete_dropout_backward(x: &Matrix, cache: Option<&ConcreteCache>, dy: &Matrix) -> (Matrix, f64) {
    match cache {
        None => (dy.clone(), 0.0),
        Some(c) => {
            let dlogit = dy
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .zip(c.dfactor.as_slice())
                .map(|((g, xi), d)| g * xi * d)
                .sum();
            (multiply(dy, &c.factor), dlogit)
        }
    }
}

/// Stand-alone concrete dropout layer owning its logit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteDropout {
    pub logit: Param,
    pub temperature: f64,
}

impl ConcreteDropout {
    pub fn new(p: f64) -> Self {
        Self {
            logit: Param::scalar(libm::log(p / (1.0 - p))),
            temperature: CONCRETE_TEMPERATURE,
        }
    }

    pub fn rate(&self) -> f64 {
        sigmoid(self.logit.get())
    }

    pub fn forward<R: Rng + ?Sized>(&self, x: &Matrix, mode: Mode, rng: &mut R) -> (Matrix, Option<ConcreteCache>) {
        concrete_dropout_forward(x, self.logit.get(), self.temperature, mode, rng)
    }

    pub fn backward(&mut self, x: &Matrix, cache: Option<&ConcreteCache>, dy: &Matrix) -> Matrix {
        let (dx, dl) = concrete_dropout_backward(x, cache, dy);
        self.logit.grad.as_mut_slice()[0] += dl;
        dx
    }
}
