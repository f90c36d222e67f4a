//! Truncated SVD of a sample matrix (rows are samples) and the norm
//! preservation bounds of the resulting orthonormal projection.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eigen::symmetric_eigen;
use super::matrix::{dot, mul, norm};
use super::Matrix;
use crate::error::{Error, Result};

/// Tuning for [`truncated_svd_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    /// Extra random directions sampled beyond `k`.
    pub oversample: usize,
    /// Subspace (power) iterations of the randomized range finder.
    pub power_iters: usize,
    /// Use the exact Gram route when `min(rows, cols)` is at most this.
    pub exact_threshold: usize,
    pub seed: u64,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            oversample: 8,
            power_iters: 2,
            exact_threshold: 512,
            seed: 0x5D_0001,
        }
    }
}

/// Leading right singular subspace of a sample matrix.
///
/// `weights` is `d × k`: its columns are the first `k` right singular
/// vectors, so `x * weights` projects a sample row onto the subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdBasis {
    pub k: usize,
    /// Every singular value the chosen route produced, non-increasing.
    pub singular_values: Vec<f64>,
    pub weights: Matrix,
    /// `sqrt(sum_{j>k} sigma_j^2)`, via `||X||_F^2 - sum_{j<=k} sigma_j^2`.
    pub tail_energy: f64,
    pub frobenius_sq: f64,
    /// True when the exact Gram route was used.
    pub exact: bool,
}

impl SvdBasis {
    /// Input dimension `d`.
    pub fn dim(&self) -> usize {
        self.weights.rows()
    }

    /// Projects every row of `x` onto the retained subspace.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        super::matmul(x, &self.weights)
    }

    pub fn project_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                op: "project_row",
                left: (1, x.len()),
                right: self.weights.shape(),
            });
        }
        let mut out = alloc::vec![0.0; self.k];
        for (xi, wrow) in x.iter().zip(self.weights.as_slice().chunks_exact(self.k)) {
            for (o, w) in out.iter_mut().zip(wrow) {
                *o += xi * w;
            }
        }
        Ok(out)
    }
}

/// Truncated SVD with the default range-finder settings and the given
/// oversample.
pub fn truncated_svd(x: &Matrix, k: usize, oversample: usize) -> Result<SvdBasis> {
    truncated_svd_with(
        x,
        k,
        &SvdOptions {
            oversample,
            ..SvdOptions::default()
        },
    )
}

pub fn truncated_svd_with(x: &Matrix, k: usize, opts: &SvdOptions) -> Result<SvdBasis> {
    let (n, d) = x.shape();
    let max = n.min(d);
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { k, max });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("truncated_svd"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let frobenius_sq = x.frobenius_norm_sq();

    let (singular_values, mut v_rows, exact) = if max <= opts.exact_threshold {
        if d <= n {
            let (s, v) = gram_right(x, k)?;
            (s, v, true)
        } else {
            let (s, v) = right_vectors_via_rows(x, k, &mut rng)?;
            (s, v, true)
        }
    } else {
        let (s, v) = randomized(x, k, opts, &mut rng)?;
        (s, v, false)
    };

    fix_signs(&mut v_rows);
    let weights = v_rows.transpose();

    let kept: f64 = singular_values.iter().take(k).map(|s| s * s).sum();
    let mut tail_sq = frobenius_sq - kept;
    // rounding residue when nothing is truncated
    if tail_sq <= 64.0 * f64::EPSILON * frobenius_sq {
        tail_sq = 0.0;
    }
    Ok(SvdBasis {
        k,
        singular_values,
        weights,
        tail_energy: libm::sqrt(tail_sq),
        frobenius_sq,
        exact,
    })
}

/// `d <= n`: eigenvectors of `XᵀX` are the right singular vectors directly.
fn gram_right(x: &Matrix, k: usize) -> Result<(Vec<f64>, Matrix)> {
    let gram = mul(x.t(), x.view());
    let eig = symmetric_eigen(&gram)?;
    let sigmas = eig.values.iter().map(|l| libm::sqrt(l.max(0.0))).collect();
    let v_rows = Matrix::from_fn(k, x.cols(), |i, j| eig.vectors.get(j, i));
    Ok((sigmas, v_rows))
}

/// Right singular vectors of a short-and-wide `b` (`r × d`, `r <= d`)
/// through the `r × r` Gram matrix `b bᵀ`. Returns all `r` singular values
/// and the first `k` right singular vectors as rows.
fn right_vectors_via_rows(
    b: &Matrix,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Matrix)> {
    let gram = mul(b.view(), b.t());
    let eig = symmetric_eigen(&gram)?;
    let sigmas: Vec<f64> = eig.values.iter().map(|l| libm::sqrt(l.max(0.0))).collect();
    // rows of Uᵀ b are sigma_j v_jᵀ
    let ut = Matrix::from_fn(k, b.rows(), |i, j| eig.vectors.get(j, i));
    let mut v_rows = mul(ut.view(), b.view());
    let floor = sigmas[0] * f64::EPSILON * (b.rows().max(b.cols()) as f64);
    for (i, s) in sigmas.iter().take(k).enumerate() {
        let row = v_rows.row_mut(i);
        if *s > floor {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            // null direction: let the orthonormaliser complete the basis
            row.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    orthonormalize_rows(&mut v_rows, rng);
    Ok((sigmas, v_rows))
}

fn randomized(
    x: &Matrix,
    k: usize,
    opts: &SvdOptions,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Matrix)> {
    let (n, d) = x.shape();
    let l = (k + opts.oversample).min(n.min(d));
    let omega = Matrix::from_fn(l, d, |_, _| StandardNormal.sample(rng));
    // bases are kept as row vectors so orthonormalisation walks contiguous memory
    let mut q = mul(omega.view(), x.t());
    orthonormalize_rows(&mut q, rng);
    for _ in 0..opts.power_iters {
        let mut z = mul(q.view(), x.view());
        orthonormalize_rows(&mut z, rng);
        q = mul(z.view(), x.t());
        orthonormalize_rows(&mut q, rng);
    }
    let b = mul(q.view(), x.view());
    right_vectors_via_rows(&b, k, rng)
}

/// Modified Gram-Schmidt, applied twice, over the rows of `m`. Rows that
/// collapse numerically are replaced by random directions.
pub(crate) fn orthonormalize_rows(m: &mut Matrix, rng: &mut ChaCha8Rng) {
    let (r, c) = m.shape();
    assert!(r <= c, "cannot orthonormalise {r} rows in dimension {c}");
    for i in 0..r {
        let mut attempts = 0;
        loop {
            let before = norm(m.row(i));
            for _ in 0..2 {
                for j in 0..i {
                    let (head, tail) = m.as_mut_slice().split_at_mut(i * c);
                    let prev = &head[j * c..(j + 1) * c];
                    let cur = &mut tail[..c];
                    let p = dot(prev, cur);
                    cur.iter_mut().zip(prev).for_each(|(a, b)| *a -= p * b);
                }
            }
            let after = norm(m.row(i));
            if after > 1e-10 * before.max(f64::MIN_POSITIVE) && after > 1e-300 {
                m.row_mut(i).iter_mut().for_each(|v| *v /= after);
                break;
            }
            attempts += 1;
            assert!(attempts < 16, "failed to complete orthonormal basis");
            for v in m.row_mut(i) {
                *v = StandardNormal.sample(rng);
            }
        }
    }
}

/// Largest-magnitude entry of each vector made positive.
fn fix_signs(v_rows: &mut Matrix) {
    for i in 0..v_rows.rows() {
        let row = v_rows.row_mut(i);
        let mut best = 0usize;
        for (j, v) in row.iter().enumerate() {
            if libm::fabs(*v) > libm::fabs(row[best]) {
                best = j;
            }
        }
        if row[best] < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// Bracket `(||x|| - tail_energy, ||x||)` on the projected norm `||xW||`.
pub fn norm_preservation_bound(basis: &SvdBasis, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            op: "norm_preservation_bound",
            left: (1, x.len()),
            right: basis.weights.shape(),
        });
    }
    let nx = norm(x);
    Ok((nx - basis.tail_energy, nx))
}

/// Tail energy scaled by `d^(-1/4)`, the expected norm loss when the
/// truncated entries of a row of `U` behave like `N(0, 1/sqrt(d))` draws.
pub fn expected_norm_degradation(basis: &SvdBasis, d: usize) -> f64 {
    let d = d.max(1) as f64;
    basis.tail_energy * libm::pow(d, -0.25)
}
