use alloc::vec::Vec;

use rand::Rng;

use super::init::{glorot_uniform, he_uniform};
use super::param::Param;
use crate::error::{Error, Result};
use crate::linalg::{gemm_into, mul, spectral_norm_power_iteration, Matrix, PowerIterState};

fn check_width(op: &'static str, x: &Matrix, width: usize) -> Result<()> {
    if x.cols() != width {
        return Err(Error::DimensionMismatch {
            op,
            left: x.shape(),
            right: (width, 0),
        });
    }
    Ok(())
}

fn add_bias(y: &mut Matrix, b: &[f64]) {
    let cols = y.cols();
    for row in y.as_mut_slice().chunks_exact_mut(cols) {
        row.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
    }
}

fn column_sums(dy: &Matrix, out: &mut [f64]) {
    for row in dy.as_slice().chunks_exact(dy.cols()) {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
    }
}

/// `y = x W + b` with `W` stored `in × out`.
pub fn dense_forward(x: &Matrix, w: &Matrix, b: Option<&[f64]>) -> Result<Matrix> {
    check_width("dense_forward", x, w.rows())?;
    let mut y = mul(x.view(), w.view());
    if let Some(b) = b {
        add_bias(&mut y, b);
    }
    Ok(y)
}

/// Gradients of [`dense_forward`] for an upstream gradient `dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub dx: Matrix,
    pub dw: Matrix,
    pub db: Vec<f64>,
}

pub fn dense_backward(x: &Matrix, w: &Matrix, dy: &Matrix) -> Result<DenseGrads> {
    check_width("dense_backward", x, w.rows())?;
    check_width("dense_backward", dy, w.cols())?;
    let mut db = alloc::vec![0.0; w.cols()];
    column_sums(dy, &mut db);
    Ok(DenseGrads {
        dx: mul(dy.view(), w.t()),
        dw: mul(x.t(), dy.view()),
        db,
    })
}

/// Fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Param,
    pub b: Option<Param>,
}

impl Dense {
    pub fn new(w: Matrix, bias: bool) -> Self {
        let b = bias.then(|| Param::new(Matrix::zeros(1, w.cols())));
        Self { w: Param::new(w), b }
    }

    pub fn he<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, bias: bool, rng: &mut R) -> Self {
        Self::new(he_uniform(fan_in, fan_out, rng), bias)
    }

    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, bias: bool, rng: &mut R) -> Self {
        Self::new(glorot_uniform(fan_in, fan_out, rng), bias)
    }

    pub fn in_dim(&self) -> usize {
        self.w.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.value.cols()
    }

    fn forward_scaled(&self, x: &Matrix, scale: f64) -> Result<Matrix> {
        check_width("dense", x, self.in_dim())?;
        let mut y = Matrix::zeros(x.rows(), self.out_dim());
        gemm_into(scale, x.view(), self.w.value.view(), 0.0, y.as_mut_slice());
        if let Some(b) = &self.b {
            add_bias(&mut y, b.value.as_slice());
        }
        Ok(y)
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.forward_scaled(x, 1.0)
    }

    /// Accumulates parameter gradients; returns `dx` when asked for.
    pub fn backward(&mut self, x: &Matrix, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        gemm_into(1.0, x.t(), dy.view(), 1.0, self.w.grad.as_mut_slice());
        if let Some(b) = &mut self.b {
            column_sums(dy, b.grad.as_mut_slice());
        }
        need_dx.then(|| mul(dy.view(), self.w.value.t()))
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = alloc::vec![&mut self.w];
        if let Some(b) = &mut self.b {
            out.push(b);
        }
        out
    }
}

/// Dense layer whose effective weights are `W · min(1, α / σ̂)`, with `σ̂`
/// the power-iteration estimate of the largest singular value of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDense {
    pub dense: Dense,
    pub alpha: f64,
    pub power: PowerIterState,
}

/// Power iterations run when a spectral layer is created.
pub const POWER_WARMUP: usize = 100;

impl SpectralDense {
    pub fn new<R: Rng + ?Sized>(dense: Dense, alpha: f64, rng: &mut R) -> Self {
        let power = PowerIterState::random(dense.in_dim(), dense.out_dim(), rng);
        let mut layer = Self { dense, alpha, power };
        layer.power_step(POWER_WARMUP);
        layer
    }

    /// Advances the persistent power iteration; the forward pass only reads it.
    pub fn power_step(&mut self, iters: usize) {
        spectral_norm_power_iteration(&self.dense.w.value, &mut self.power, iters);
    }

    /// `uᵀ W v` for the current iteration vectors.
    pub fn sigma_estimate(&self) -> f64 {
        self.power.rayleigh(&self.dense.w.value)
    }

    /// Factor applied to `W` in the forward pass.
    pub fn scale(&self) -> f64 {
        let s = self.sigma_estimate();
        if s > self.alpha {
            self.alpha / s
        } else {
            1.0
        }
    }

    pub fn effective_weights(&self) -> Matrix {
        let mut w = self.dense.w.value.clone();
        w.scale(self.scale());
        w
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.dense.forward_scaled(x, self.scale())
    }

    pub fn backward(&mut self, x: &Matrix, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        let sigma = self.sigma_estimate();
        let w = &self.dense.w;
        let dx = need_dx.then(|| {
            let mut dx = Matrix::zeros(dy.rows(), w.value.rows());
            gemm_into(self.scale(), dy.view(), w.value.t(), 0.0, dx.as_mut_slice());
            dx
        });
        if let Some(b) = &mut self.dense.b {
            column_sums(dy, b.grad.as_mut_slice());
        }
        let w = &mut self.dense.w;
        if sigma > self.alpha {
            // d/dW of (α/σ) W with σ = uᵀWv: (α/σ) G − (α/σ²) <G, W> u vᵀ
            let g = mul(x.t(), dy.view());
            let s = self.alpha / sigma;
            let inner: f64 = g.as_slice().iter().zip(w.value.as_slice()).map(|(a, b)| a * b).sum();
            let c = s * inner / sigma;
            let cols = g.cols();
            for (i, (grow, gout)) in g
                .as_slice()
                .chunks_exact(cols)
                .zip(w.grad.as_mut_slice().chunks_exact_mut(cols))
                .enumerate()
            {
                let ui = self.power.u[i];
                for j in 0..cols {
                    gout[j] += s * grow[j] - c * ui * self.power.v[j];
                }
            }
        } else {
            gemm_into(1.0, x.t(), dy.view(), 1.0, w.grad.as_mut_slice());
        }
        dx
    }
}

/// Fixed linear map `x W` with no trainable state (the SVD projection).
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenProjection {
    pub w: Matrix,
}

impl FrozenProjection {
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        dense_forward(x, &self.w, None)
    }

    pub fn backward(&self, dy: &Matrix) -> Matrix {
        mul(dy.view(), self.w.t())
    }
}

/// The linear maps used as feature extractors and inside residual blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum Linear {
    Plain(Dense),
    Spectral(SpectralDense),
    Frozen(FrozenProjection),
}

impl Linear {
    pub fn in_dim(&self) -> usize {
        match self {
            Linear::Plain(d) => d.in_dim(),
            Linear::Spectral(s) => s.dense.in_dim(),
            Linear::Frozen(f) => f.w.rows(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Linear::Plain(d) => d.out_dim(),
            Linear::Spectral(s) => s.dense.out_dim(),
            Linear::Frozen(f) => f.w.cols(),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            Linear::Plain(d) => d.forward(x),
            Linear::Spectral(s) => s.forward(x),
            Linear::Frozen(f) => f.forward(x),
        }
    }

    pub fn backward(&mut self, x: &Matrix, dy: &Matrix, need_dx: bool) -> Option<Matrix> {
        match self {
            Linear::Plain(d) => d.backward(x, dy, need_dx),
            Linear::Spectral(s) => s.backward(x, dy, need_dx),
            Linear::Frozen(f) => need_dx.then(|| f.backward(dy)),
        }
    }

    pub fn power_step(&mut self, iters: usize) {
        if let Linear::Spectral(s) = self {
            s.power_step(iters);
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Linear::Plain(d) => d.params_mut(),
            Linear::Spectral(s) => s.dense.params_mut(),
            Linear::Frozen(_) => Vec::new(),
        }
    }
}

pub fn relu(x: &Matrix) -> Matrix {
    let mut y = x.clone();
    y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

/// Gradient through a relu given its output `y`.
pub fn relu_backward(y: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = dy.clone();
    dx.as_mut_slice()
        .iter_mut()
        .zip(y.as_slice())
        .for_each(|(d, &v)| {
            if v <= 0.0 {
                *d = 0.0
            }
        });
    dx
}
