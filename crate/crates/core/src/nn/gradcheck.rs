use alloc::vec::Vec;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-6;

/// Central-difference gradient of `f` at `x`.
pub fn numerical_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − n| / max(|a|, |n|, REL_FLOOR)` between `analytic` and the
/// central-difference gradient of `f` at `x`.
pub fn finite_difference_check(f: impl FnMut(&[f64]) -> f64, x: &[f64], analytic: &[f64], h: f64) -> f64 {
    assert_eq!(x.len(), analytic.len(), "gradient length");
    let numeric = numerical_gradient(f, x, h);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .fold(0.0, f64::max)
}
