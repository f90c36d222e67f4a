use rand::Rng;

use super::dropout::{
    concrete_dropout_backward, concrete_dropout_forward, dropout_backward, dropout_forward, ConcreteCache, Mode,
    CONCRETE_TEMPERATURE,
};
use super::linear::{relu, relu_backward, Linear};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dropout variant inside a residual block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlockDropout {
    /// Fixed rate.
    Fixed(f64),
    /// Trainable rate; the logit is owned by the enclosing model and passed
    /// to each call.
    Concrete,
}

/// `h(x) = x + Dropout(Relu(Linear(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub linear: Linear,
    pub dropout: BlockDropout,
}

#[derive(Debug, Clone, PartialEq)]
enum DropState {
    Fixed(Option<Matrix>),
    Concrete(Option<ConcreteCache>),
}

/// Intermediate values of one block pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCache {
    x: Matrix,
    act: Matrix,
    drop: DropState,
}

impl ResidualBlock {
    pub fn new(linear: Linear, dropout: BlockDropout) -> Result<Self> {
        if linear.in_dim() != linear.out_dim() {
            return Err(Error::DimensionMismatch {
                op: "residual_block",
                left: (linear.in_dim(), linear.out_dim()),
                right: (linear.in_dim(), linear.in_dim()),
            });
        }
        Ok(Self { linear, dropout })
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Matrix,
        mode: Mode,
        logit: f64,
        rng: &mut R,
    ) -> Result<(Matrix, BlockCache)> {
        let act = relu(&self.linear.forward(x)?);
        let (mut y, drop) = match self.dropout {
            BlockDropout::Fixed(p) => {
                let (y, m) = dropout_forward(&act, p, mode, rng)?;
                (y, DropState::Fixed(m))
            }
            BlockDropout::Concrete => {
                let (y, c) = concrete_dropout_forward(&act, logit, CONCRETE_TEMPERATURE, mode, rng);
                (y, DropState::Concrete(c))
            }
        };
        y.as_mut_slice().iter_mut().zip(x.as_slice()).for_each(|(a, b)| *a += b);
        Ok((y, BlockCache { x: x.clone(), act, drop }))
    }

    /// Returns `dx`; the concrete-dropout logit gradient is added to `dlogit`.
    pub fn backward(&mut self, cache: &BlockCache, dy: &Matrix, dlogit: &mut f64) -> Matrix {
        let dact = match &cache.drop {
            DropState::Fixed(m) => dropout_backward(m.as_ref(), dy),
            DropState::Concrete(c) => {
                let (d, dl) = concrete_dropout_backward(&cache.act, c.as_ref(), dy);
                *dlogit += dl;
                d
            }
        };
        let da = relu_backward(&cache.act, &dact);
        let mut dx = self.linear.backward(&cache.x, &da, true).expect("dx requested");
        dx.as_mut_slice().iter_mut().zip(dy.as_slice()).for_each(|(a, b)| *a += b);
        dx
    }
}
