use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Matrix;
use crate::error::{Error, Result};

/// Seeded subset of the `i < j` row pairs. `fraction == 1` returns every
/// pair in lexicographic order; otherwise `ceil(fraction * total)` pairs are
/// drawn without replacement and returned sorted.
pub fn sample_pairs(n: usize, fraction: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "pair fraction {fraction} not in (0, 1]"
        )));
    }
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let total = n * (n - 1) / 2;
    let all = || (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)));
    if fraction >= 1.0 {
        return Ok(all().collect());
    }
    let count = (libm::ceil(fraction * total as f64) as usize).clamp(1, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, total, count).into_vec();
    picks.sort_unstable();
    Ok(picks.into_iter().map(|p| pair_from_index(n, p)).collect())
}

/// Inverse of the lexicographic pair enumeration.
fn pair_from_index(n: usize, mut p: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if p < row {
            return (i, i + 1 + p);
        }
        p -= row;
        i += 1;
    }
}

pub fn distances_for_pairs(x: &Matrix, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| {
            let s: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            libm::sqrt(s)
        })
        .collect()
}

/// Euclidean distances over a seeded random subset of row pairs.
pub fn pairwise_distances(x: &Matrix, pair_fraction: f64, seed: u64) -> Result<Vec<f64>> {
    let pairs = sample_pairs(x.rows(), pair_fraction, seed)?;
    Ok(distances_for_pairs(x, &pairs))
}

pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "pearson_correlation",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            got: a.len(),
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate("zero variance in correlation input"));
    }
    Ok((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(a: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut r = alloc::vec![0.0; a.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && a[order[end]] == a[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &o in &order[start..end] {
            r[o] = avg;
        }
        start = end;
    }
    r
}

pub fn spearman_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson_correlation(&ranks(a), &ranks(b))
}
