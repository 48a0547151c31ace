//! Thin wrappers around `rustfft` for real periodic samples on `[0, 2π)`.
//!
//! Spectra use the convention `f(x_j) = Σ_k f̂_k e^{ikx_j}` with `x_j = 2πj/n`,
//! so [`analyze`] divides by `n` and [`synthesize`] does not.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Forward and inverse plans for length `n`, cached per thread.
pub fn plans(n: usize) -> Plans {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry(n)
            .or_insert_with(|| (planner.plan_fft_forward(n), planner.plan_fft_inverse(n)))
            .clone()
    })
}

/// Signed wavenumber stored at FFT index `j` of a length-`n` transform.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Normalized spectrum of real samples.
pub fn analyze(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let (fwd, _) = plans(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    let inv_n = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= inv_n);
    buf
}

/// Real part of the trigonometric sum for a full-length spectrum.
pub fn synthesize(spectrum: &[Complex64]) -> Vec<f64> {
    let n = spectrum.len();
    let (_, inv) = plans(n);
    let mut buf = spectrum.to_vec();
    inv.process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Applies a real, even-in-k multiplier-free operator `k -> m(k)` to real samples.
///
/// `m` must map real functions to real functions, i.e. `m(-k) = conj(m(k))`.
/// The Nyquist mode is passed `k = n/2` and it is the caller's job to return
/// a real value there.
pub fn apply_multiplier(values: &[f64], m: impl Fn(i64) -> Complex64) -> Vec<f64> {
    let n = values.len();
    let mut spec = analyze(values);
    for (j, c) in spec.iter_mut().enumerate() {
        *c *= m(wavenumber(j, n));
    }
    synthesize(&spec)
}

/// Spectral x-derivative of real periodic samples.
pub fn differentiate(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    apply_multiplier(values, |k| {
        if n % 2 == 0 && k == (n / 2) as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k as f64)
        }
    })
}

/// Uniform periodic grid `x_j = 2πj/n`.
pub fn grid_points(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_sine() {
        let x = grid_points(32);
        let f: Vec<f64> = x.iter().map(|&x| (3.0 * x).sin()).collect();
        let df = differentiate(&f);
        for (xi, d) in x.iter().zip(&df) {
            assert!((d - 3.0 * (3.0 * xi).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn analyze_synthesize_round_trip() {
        let x = grid_points(16);
        let f: Vec<f64> = x.iter().map(|&x| 1.0 + (x + PI / 7.0).cos()).collect();
        let back = synthesize(&analyze(&f));
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
