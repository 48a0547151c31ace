//! Chebyshev collocation on `[0, 1]`, restarted GMRES, and scalar root finding.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Gauss–Lobatto nodes `σ_j = (1 − cos(jπ/M))/2`, `j = 0..=M`, increasing from 0 to 1.
pub fn chebyshev_nodes(m: usize) -> Vec<f64> {
    (0..=m)
        .map(|j| 0.5 * (1.0 - (j as f64 * PI / m as f64).cos()))
        .collect()
}

/// Differentiation matrix on the nodes of [`chebyshev_nodes`].
pub fn chebyshev_diff_matrix(m: usize) -> DMatrix<f64> {
    // Standard matrix on t_j = cos(jπ/M) ∈ [-1, 1]; σ = (1 − t)/2 gives d/dσ = −2 d/dt.
    let t: Vec<f64> = (0..=m).map(|j| (j as f64 * PI / m as f64).cos()).collect();
    let c = |j: usize| if j == 0 || j == m { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(m + 1, m + 1);
    for i in 0..=m {
        for j in 0..=m {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (t[i] - t[j]);
            }
        }
    }
    for i in 0..=m {
        let s: f64 = (0..=m).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    d * -2.0
}

/// Maps nodal values to Chebyshev coefficients `a_n` with `f = Σ a_n T_n(1 − 2σ)`.
pub fn chebyshev_coefficient_matrix(m: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(m + 1, m + 1);
    for n in 0..=m {
        let cn = if n == 0 || n == m { 2.0 } else { 1.0 };
        for j in 0..=m {
            let cj = if j == 0 || j == m { 2.0 } else { 1.0 };
            a[(n, j)] = 2.0 / (m as f64 * cn * cj) * (n as f64 * j as f64 * PI / m as f64).cos();
        }
    }
    a
}

/// Outcome of a Krylov solve.
#[derive(Clone, Copy, Debug)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Restarted, right-preconditioned GMRES for `A x = b` starting at `x = 0`.
///
/// `apply(x, y)` writes `A x` into `y`; `precond(x, y)` writes `M⁻¹ x` into `y`.
pub fn gmres(
    apply: &mut dyn FnMut(&[f64], &mut [f64]),
    precond: &mut dyn FnMut(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> (Vec<f64>, KrylovStats) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return (
            x,
            KrylovStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        );
    }
    let mut total = 0;
    let mut r = b.to_vec();
    let mut rel = 1.0;
    let mut tmp = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut cycle_start = f64::INFINITY;
    while total < max_iters {
        let beta = norm(&r);
        rel = beta / bnorm;
        // Stop at the rounding floor: a full cycle that did not halve the residual.
        if rel <= tol || rel > 0.5 * cycle_start {
            break;
        }
        cycle_start = rel;
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..restart {
            if total >= max_iters {
                break;
            }
            precond(&v[j], &mut z);
            apply(&z, &mut tmp);
            zs.push(z.clone());
            total += 1;
            let mut w = tmp.clone();
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let hij = dot(&w, vi);
                    hess[i][j] += hij;
                    w.iter_mut().zip(vi).for_each(|(wk, vk)| *wk -= hij * vk);
                }
            }
            let wn = norm(&w);
            hess[j + 1][j] = wn;
            for i in 0..j {
                let t = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = t;
            }
            let denom = hess[j][j].hypot(hess[j + 1][j]);
            cs[j] = hess[j][j] / denom;
            sn[j] = hess[j + 1][j] / denom;
            hess[j][j] = denom;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            rel = g[j + 1].abs() / bnorm;
            if rel <= tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wk| wk / wn).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| hess[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (yi, zi) in y.iter().zip(&zs) {
            x.iter_mut().zip(zi).for_each(|(xk, zk)| *xk += yi * zk);
        }
        apply(&x, &mut tmp);
        r.iter_mut()
            .zip(b.iter().zip(&tmp))
            .for_each(|(rk, (bk, ak))| *rk = bk - ak);
        rel = norm(&r) / bnorm;
        if rel <= tol {
            break;
        }
    }
    (
        x,
        KrylovStats {
            iterations: total,
            relative_residual: rel,
        },
    )
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Brent's method for a root of `f` in `[a, b]` given a sign change.
pub fn brent_root(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    xtol: f64,
    max_iters: usize,
) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Validation(format!(
            "root not bracketed on [{a}, {b}]"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iters {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::Convergence {
        what: "Brent root search",
        iterations: max_iters,
        residual: fb.abs(),
        tol: xtol,
    })
}

/// Smallest singular value of a dense matrix.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}
