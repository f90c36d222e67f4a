//! LULU order-statistic smoothers.
//!
//! Windows overlapping either end are clipped to the valid index range
//! rather than padded.

use alloc::vec::Vec;

use crate::error::{Error, Result};

fn check(x: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("LULU window must be >= 1".into()));
    }
    if x.len() <= 2 * n {
        return Err(Error::SeriesTooShort {
            len: x.len(),
            window: n,
        });
    }
    Ok(())
}

/// `out_i = outer_{j in [i-n, i]} inner_{k in [j, j+n]} x_k`, each window
/// clipped to the valid index range.
fn sweep(x: &[f64], n: usize, inner: fn(f64, f64) -> f64, outer: fn(f64, f64) -> f64) -> Vec<f64> {
    let len = x.len();
    // block[j + n] holds window j for j in -n..len
    let block: Vec<f64> = (0..len + n)
        .map(|s| {
            let lo = s.saturating_sub(n);
            let hi = s.min(len - 1);
            x[lo + 1..=hi].iter().fold(x[lo], |a, &b| inner(a, b))
        })
        .collect();
    (0..len)
        .map(|i| block[i + 1..=i + n].iter().fold(block[i], |a, &b| outer(a, b)))
        .collect()
}

/// `L_n`: max of window minima. Removes upward impulses of width `<= n`.
pub fn lulu_lower(x: &[f64], n: usize) -> Result<Vec<f64>> {
    check(x, n)?;
    Ok(sweep(x, n, f64::min, f64::max))
}

/// `U_n`: min of window maxima. Removes downward impulses of width `<= n`.
pub fn lulu_upper(x: &[f64], n: usize) -> Result<Vec<f64>> {
    check(x, n)?;
    Ok(sweep(x, n, f64::max, f64::min))
}

/// `U_n ∘ L_n`.
pub fn lulu_smooth(x: &[f64], n: usize) -> Result<Vec<f64>> {
    lulu_upper(&lulu_lower(x, n)?, n)
}
