//! Dirichlet–Neumann operator `G(η;b)` through a Fourier–Chebyshev solve on the
//! layer `−h + b(x) < y < η(x)` mapped to `S¹ × [0, 1]`.
//!
//! The map is `y = β(x) + σ d(x)` with `β = −h + b` and `d = η − β`. The mapped
//! Laplacian is preconditioned by its flat counterpart (constant depth, no
//! cross terms), which is diagonal in the Fourier index, and solved by GMRES.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft;
use crate::fourier::PeriodicField;
use crate::linalg::{self, chebyshev_coefficient_matrix, chebyshev_diff_matrix, chebyshev_nodes};

/// Fluid layer between the bottom `y = −h + b(x)` and the surface `y = η(x)`.
#[derive(Clone, Debug)]
pub struct FluidDomain {
    pub eta: PeriodicField,
    pub b: PeriodicField,
    pub h: f64,
}

impl FluidDomain {
    pub fn new(eta: PeriodicField, b: PeriodicField, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Validation(format!("depth h must be positive, got {h}")));
        }
        let d = FluidDomain { eta, b, h };
        let t = d.min_thickness();
        if !(t > 0.0) {
            return Err(Error::LayerCollapse { min_thickness: t });
        }
        Ok(d)
    }

    /// `min_x (η + h − b)` on the surface grid.
    pub fn min_thickness(&self) -> f64 {
        let n = self.eta.config().grid_size();
        let eta = self.eta.to_grid_n(n);
        let b = self.b.to_grid_n(n.max(2 * self.b.n_modes() + 2));
        let b = if b.len() == n { b } else { resample_grid(&b, n) };
        eta.iter()
            .zip(&b)
            .map(|(e, bb)| e + self.h - bb)
            .fold(f64::INFINITY, f64::min)
    }
}

fn resample_grid(values: &[f64], n: usize) -> Vec<f64> {
    let m = values.len();
    let spec = fft::analyze(values);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let top = (m.min(n) - 1) / 2;
    out[0] = spec[0];
    for k in 1..=top {
        out[k] = spec[k];
        out[n - k] = spec[m - k];
    }
    fft::synthesize(&out)
}

/// Diagnostics of one mapped Laplace solve.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct DnSolveReport {
    /// Relative residual of the collocation system.
    pub residual: f64,
    /// Largest bottom-row residual, scaled by the largest Dirichlet datum.
    pub bottom_neumann_residual: f64,
    pub vertical_points: usize,
    pub gmres_iterations: usize,
    /// Largest Chebyshev coefficient in the top quarter of the spectrum, relative to the data.
    pub vertical_tail: f64,
    /// Mean of `N_η·∇Φ` on the surface before projection.
    pub output_mean: f64,
}

/// Solver knobs for [`dn_apply_with`].
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DnOptions {
    pub vertical_points: usize,
    pub tol: f64,
    /// Doubling threshold for [`DnSolveReport::vertical_tail`].
    pub tail_tol: f64,
    pub max_iters: usize,
}

impl Default for DnOptions {
    fn default() -> Self {
        DnOptions {
            vertical_points: 32,
            tol: 1e-12,
            tail_tol: 1e-12,
            max_iters: 400,
        }
    }
}

/// `G(η;b)ξ`, projected to zero mean, with the solver report.
pub fn dn_apply(
    domain: &FluidDomain,
    xi: &PeriodicField,
    vertical_points: usize,
) -> Result<(PeriodicField, DnSolveReport)> {
    dn_apply_with(
        domain,
        xi,
        &DnOptions {
            vertical_points,
            ..Default::default()
        },
    )
}

pub fn dn_apply_with(
    domain: &FluidDomain,
    xi: &PeriodicField,
    opts: &DnOptions,
) -> Result<(PeriodicField, DnSolveReport)> {
    if opts.vertical_points < 8 {
        return Err(Error::Validation(format!(
            "vertical_points must be at least 8, got {}",
            opts.vertical_points
        )));
    }
    let t = domain.min_thickness();
    if !(t > 0.0) {
        return Err(Error::LayerCollapse { min_thickness: t });
    }
    let (out, report) = dn_solve(domain, xi, opts.vertical_points, opts)?;
    if report.vertical_tail > opts.tail_tol {
        let (out2, report2) = dn_solve(domain, xi, 2 * opts.vertical_points, opts)?;
        return Ok((out2, report2));
    }
    Ok((out, report))
}

/// First-order change `(G(η;0) − G(0;0))ξ` per unit `η`, by Richardson extrapolation in the amplitude.
///
/// Returns the linear term `δG(0)[η]ξ` such that `G(εη;0)ξ ≈ G(0;0)ξ + ε δG(0)[η]ξ`.
pub fn dn_flat_bottom_linearized(
    eta: &PeriodicField,
    xi: &PeriodicField,
    h: f64,
) -> Result<PeriodicField> {
    let cfg = *eta.config();
    if eta.is_zero() || xi.is_zero() {
        return Ok(PeriodicField::zeros(cfg));
    }
    let scale = eta.max_abs();
    let eps = 1e-3 * h / scale;
    let b = PeriodicField::zeros(cfg);
    let opts = DnOptions::default();
    // Central differences in ±ε and ±ε/2 cancel the even orders; Richardson removes ε².
    let diff = |e: f64| -> Result<PeriodicField> {
        let plus = dn_apply_with(&FluidDomain::new(eta.scale(e), b.clone(), h)?, xi, &opts)?.0;
        let minus = dn_apply_with(&FluidDomain::new(eta.scale(-e), b.clone(), h)?, xi, &opts)?.0;
        Ok(plus.axpy(-1.0, &minus).scale(0.5 / e))
    };
    let d1 = diff(eps)?;
    let d2 = diff(0.5 * eps)?;
    Ok(d2.scale(4.0 / 3.0).axpy(-1.0 / 3.0, &d1))
}

/// Collocation data of a solve on the mapped strip.
#[derive(Clone, Debug)]
pub struct StripSolution {
    pub n: usize,
    pub sigma: Vec<f64>,
    /// Physical heights `y(x_i, σ_j)`, level-major.
    pub y: Vec<f64>,
    /// Potential at the nodes, level-major.
    pub psi: Vec<f64>,
    pub report: DnSolveReport,
}

impl StripSolution {
    pub fn levels(&self) -> usize {
        self.sigma.len()
    }

    pub fn level(&self, j: usize) -> &[f64] {
        &self.psi[j * self.n..(j + 1) * self.n]
    }
}

/// Harmonic `Φ` on `−h + b < y < 0` with `N_b·∇Φ = g` on the bottom, continued
/// as a decaying harmonic function into `y > 0`.
///
/// The flat top carries the exact transparent condition `Φ_y = −|D|Φ` with
/// `Φ → 0` as `y → ∞`. `g` is sampled on the uniform grid of `n = g.len()` points.
pub fn solve_decaying_strip(
    b: &PeriodicField,
    h: f64,
    g: &[f64],
    vertical_points: usize,
    tol: f64,
) -> Result<StripSolution> {
    let n = g.len();
    let top = vec![0.0; n];
    let geo = Geometry::new(&top, b, h, vertical_points, TopKind::HalfSpace)?;
    let m = geo.m;
    let mut rhs = vec![0.0; (m + 1) * n];
    for i in 0..n {
        rhs[i] = geo.d[i] * g[i];
    }
    let pre = geo.preconditioner();
    let (psi, stats, res) = geo.solve(&pre, &rhs, tol, 600);
    if !(stats.relative_residual <= 100.0 * tol) {
        return Err(Error::Convergence {
            what: "mapped strip solve",
            iterations: stats.iterations,
            residual: stats.relative_residual,
            tol,
        });
    }
    let mut y = vec![0.0; (m + 1) * n];
    for j in 0..=m {
        for i in 0..n {
            y[j * n + i] = geo.beta[i] + geo.sigma[j] * geo.d[i];
        }
    }
    let gscale = g.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let report = DnSolveReport {
        residual: stats.relative_residual,
        bottom_neumann_residual: res[..n].iter().fold(0.0_f64, |a, v| a.max(v.abs())) / gscale,
        vertical_points: m,
        gmres_iterations: stats.iterations,
        vertical_tail: geo.vertical_tail(&psi, 1.0),
        output_mean: 0.0,
    };
    Ok(StripSolution {
        n,
        sigma: geo.sigma.clone(),
        y,
        psi,
        report,
    })
}

fn dn_solve(
    domain: &FluidDomain,
    xi: &PeriodicField,
    m: usize,
    opts: &DnOptions,
) -> Result<(PeriodicField, DnSolveReport)> {
    let cfg = *xi.config();
    let n = cfg.grid_size();
    let tau = domain.eta.to_grid_n(n);
    let geo = Geometry::new(&tau, &domain.b, domain.h, m, TopKind::Dirichlet)?;
    let xi_grid = xi.to_grid_n(n);
    let scale = xi_grid.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok((
            PeriodicField::zeros(cfg),
            DnSolveReport {
                vertical_points: m,
                ..Default::default()
            },
        ));
    }
    let lift = Lift::new(&geo, xi, n);
    let rhs = geo.lift_forcing(&lift);
    let pre = geo.preconditioner();
    // The collocation matrix has condition number of order M⁴, so the
    // attainable residual grows with M.
    let tol = opts.tol * (m as f64 / 32.0).powi(4).max(1.0);
    let (chi, stats, res) = geo.solve(&pre, &rhs, tol, opts.max_iters);
    if !(stats.relative_residual <= 1e3 * tol.max(1e-15)) {
        return Err(Error::Convergence {
            what: "Dirichlet-Neumann solve",
            iterations: stats.iterations,
            residual: stats.relative_residual,
            tol,
        });
    }
    // N_η·∇Φ = (1+τ'²) ψ_σ / d − τ' ψ_x at σ = 1, with ψ_x = ξ_x there.
    let d = &geo.d;
    let mut chi_sigma = vec![0.0; n];
    for l in 0..=m {
        let w = geo.dmat[(m, l)];
        if w != 0.0 {
            chi_sigma
                .iter_mut()
                .zip(&chi[l * n..(l + 1) * n])
                .for_each(|(s, c)| *s += w * c);
        }
    }
    let xi_x = fft::differentiate(&xi_grid);
    let out: Vec<f64> = (0..n)
        .map(|i| {
            let tp = geo.tp[i];
            let psi_s = lift.sigma_top[i] + chi_sigma[i];
            (1.0 + tp * tp) * psi_s / d[i] - tp * xi_x[i]
        })
        .collect();
    let (field, mean) = PeriodicField::from_grid(cfg, &out);
    let rscale = rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let report = DnSolveReport {
        residual: stats.relative_residual,
        bottom_neumann_residual: res[..n].iter().fold(0.0_f64, |a, v| a.max(v.abs())) / scale.max(rscale),
        vertical_points: m,
        gmres_iterations: stats.iterations,
        vertical_tail: geo.vertical_tail(&chi, scale),
        output_mean: mean,
    };
    Ok((field, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum TopKind {
    Dirichlet,
    HalfSpace,
}

/// Mapped coefficients on an `n × (M+1)` collocation grid.
struct Geometry {
    n: usize,
    m: usize,
    kind: TopKind,
    sigma: Vec<f64>,
    dmat: DMatrix<f64>,
    d2mat: DMatrix<f64>,
    beta: Vec<f64>,
    bp: Vec<f64>,
    d: Vec<f64>,
    tp: Vec<f64>,
    dbar: f64,
    /// Level-major coefficients of ψ_xx, ψ_xσ, ψ_σσ, ψ_σ in the interior rows.
    cxx: Vec<f64>,
    cxs: Vec<f64>,
    css: Vec<f64>,
    cs: Vec<f64>,
}

impl Geometry {
    fn new(tau: &[f64], b: &PeriodicField, h: f64, m: usize, kind: TopKind) -> Result<Self> {
        let n = tau.len();
        let bgrid = if 2 * b.n_modes() < n {
            b.to_grid_n(n)
        } else {
            resample_grid(&b.to_grid_n(2 * b.n_modes() + 2), n)
        };
        let beta: Vec<f64> = bgrid.iter().map(|bb| -h + bb).collect();
        let bp = fft::differentiate(&bgrid);
        let bpp = fft::differentiate(&bp);
        let d: Vec<f64> = tau.iter().zip(&beta).map(|(t, bb)| t - bb).collect();
        let min_d = d.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if !(min_d > 0.0) {
            return Err(Error::LayerCollapse { min_thickness: min_d });
        }
        let tp = fft::differentiate(tau);
        let dp: Vec<f64> = tp.iter().zip(&bp).map(|(a, bb)| a - bb).collect();
        let dpp = fft::differentiate(&dp);
        let dbar = d.iter().sum::<f64>() / n as f64;
        let sigma = chebyshev_nodes(m);
        let dmat = chebyshev_diff_matrix(m);
        let d2mat = &dmat * &dmat;
        let size = (m + 1) * n;
        let (mut cxx, mut cxs, mut css, mut cs) =
            (vec![0.0; size], vec![0.0; size], vec![0.0; size], vec![0.0; size]);
        for (j, &s) in sigma.iter().enumerate() {
            for i in 0..n {
                let a = -(bp[i] + s * dp[i]);
                let k = j * n + i;
                cxx[k] = d[i] * d[i];
                cxs[k] = 2.0 * d[i] * a;
                css[k] = 1.0 + a * a;
                cs[k] = -d[i] * (bpp[i] + s * dpp[i]) - 2.0 * a * dp[i];
            }
        }
        Ok(Geometry {
            n,
            m,
            kind,
            sigma,
            dmat,
            d2mat,
            beta,
            bp,
            d,
            tp,
            dbar,
            cxx,
            cxs,
            css,
            cs,
        })
    }

    /// Residual rows of the collocation system applied to level-major `psi`.
    fn apply(&self, psi: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let (px, pxx) = level_derivatives(psi, n);
        let sig = |mat: &DMatrix<f64>, src: &[f64], j: usize, dst: &mut [f64]| {
            dst.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..=m {
                let w = mat[(j, l)];
                if w != 0.0 {
                    dst.iter_mut()
                        .zip(&src[l * n..(l + 1) * n])
                        .for_each(|(a, b)| *a += w * b);
                }
            }
        };
        let mut ps = vec![0.0; n];
        let mut pss = vec![0.0; n];
        let mut pxs = vec![0.0; n];
        for j in 1..m {
            sig(&self.dmat, psi, j, &mut ps);
            sig(&self.d2mat, psi, j, &mut pss);
            sig(&self.dmat, &px, j, &mut pxs);
            let row = &mut out[j * n..(j + 1) * n];
            for i in 0..n {
                let k = j * n + i;
                row[i] = self.cxx[k] * pxx[k]
                    + self.cxs[k] * pxs[i]
                    + self.css[k] * pss[i]
                    + self.cs[k] * ps[i];
            }
        }
        sig(&self.dmat, psi, 0, &mut ps);
        for i in 0..n {
            let bp = self.bp[i];
            out[i] = -(1.0 + bp * bp) * ps[i] + self.d[i] * bp * px[i];
        }
        let top = m * n;
        match self.kind {
            TopKind::Dirichlet => out[top..].copy_from_slice(&psi[top..]),
            TopKind::HalfSpace => {
                sig(&self.dmat, psi, m, &mut ps);
                let level = &psi[top..];
                let mean = level.iter().sum::<f64>() / n as f64;
                let absd = fft::apply_multiplier(level, |k| Complex64::new(k.abs() as f64, 0.0));
                for i in 0..n {
                    out[top + i] = ps[i] / self.d[i] + absd[i] + mean;
                }
            }
        }
    }

    fn preconditioner(&self) -> Rc<FlatPreconditioner> {
        FlatPreconditioner::cached(self.n, self.m, self.dbar, self.kind, &self.dmat, &self.d2mat)
    }

    fn solve(
        &self,
        pre: &FlatPreconditioner,
        rhs: &[f64],
        tol: f64,
        max_iters: usize,
    ) -> (Vec<f64>, linalg::KrylovStats, Vec<f64>) {
        let mut apply = |x: &[f64], y: &mut [f64]| self.apply(x, y);
        let mut prec = |x: &[f64], y: &mut [f64]| pre.apply(x, y);
        let (x, stats) = linalg::gmres(&mut apply, &mut prec, rhs, tol, 60, max_iters);
        let mut ax = vec![0.0; rhs.len()];
        self.apply(&x, &mut ax);
        let res: Vec<f64> = rhs.iter().zip(&ax).map(|(r, a)| r - a).collect();
        (x, stats, res)
    }

    /// Right-hand side for `χ = ψ − ψ₀`, where `ψ₀` is the flat harmonic lift of `ξ`.
    fn lift_forcing(&self, lift: &Lift) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        let dbar2 = self.dbar * self.dbar;
        let mut rhs = vec![0.0; (m + 1) * n];
        for j in 1..m {
            for i in 0..n {
                let k = j * n + i;
                // d̄² ψ₀_xx + ψ₀_σσ = 0 removes the flat part of the operator.
                let pxx = lift.xx[k];
                let pss = -dbar2 * pxx;
                let l = self.cxx[k] * pxx
                    + self.cxs[k] * lift.xs[k]
                    + self.css[k] * pss
                    + self.cs[k] * lift.s[k];
                rhs[k] = -l;
            }
        }
        for i in 0..n {
            // ψ₀_σ vanishes at the bottom.
            rhs[i] = -self.d[i] * self.bp[i] * lift.x_bottom[i];
        }
        rhs
    }

    /// Size of the top quarter of the Chebyshev coefficients of `psi`, relative to `scale`.
    fn vertical_tail(&self, psi: &[f64], scale: f64) -> f64 {
        let (n, m) = (self.n, self.m);
        let a = chebyshev_coefficient_matrix(m);
        let start = (3 * m) / 4;
        let mut tail = 0.0_f64;
        let mut col = vec![0.0; m + 1];
        for i in 0..n {
            for j in 0..=m {
                col[j] = psi[j * n + i];
            }
            for r in start..=m {
                let c: f64 = (0..=m).map(|j| a[(r, j)] * col[j]).sum();
                tail = tail.max(c.abs());
            }
        }
        tail / scale.max(f64::MIN_POSITIVE)
    }
}

/// `ψ₀(x, σ) = Σ ξ̂_k cosh(|k| d̄ σ)/cosh(|k| d̄) e^{ikx}` and the derivatives the forcing needs.
struct Lift {
    xx: Vec<f64>,
    xs: Vec<f64>,
    s: Vec<f64>,
    x_bottom: Vec<f64>,
    sigma_top: Vec<f64>,
}

impl Lift {
    fn new(geo: &Geometry, xi: &PeriodicField, n: usize) -> Self {
        let m = geo.m;
        let kk = xi.n_modes();
        let size = (m + 1) * n;
        let (mut xx, mut xs, mut s) = (vec![0.0; size], vec![0.0; size], vec![0.0; size]);
        let mut spec_xx = vec![Complex64::new(0.0, 0.0); n];
        let mut spec_xs = vec![Complex64::new(0.0, 0.0); n];
        let mut spec_s = vec![Complex64::new(0.0, 0.0); n];
        let profile = |k: usize, sig: f64| -> (f64, f64) {
            let kap = k as f64 * geo.dbar;
            let e1 = (kap * (sig - 1.0)).exp();
            let e2 = (-kap * (sig + 1.0)).exp();
            let den = 1.0 + (-2.0 * kap).exp();
            ((e1 + e2) / den, kap * (e1 - e2) / den)
        };
        let mut x_bottom = vec![0.0; n];
        let mut sigma_top = vec![0.0; n];
        for (j, &sig) in geo.sigma.iter().enumerate() {
            for k in 1..=kk {
                let c = xi.coeff(k as i64);
                let (ch, sh) = profile(k, sig);
                let ik = Complex64::new(0.0, k as f64);
                let kx = c * ch;
                spec_xx[k] = -((k * k) as f64) * kx;
                spec_xs[k] = ik * c * sh;
                spec_s[k] = c * sh;
                spec_xx[n - k] = spec_xx[k].conj();
                spec_xs[n - k] = spec_xs[k].conj();
                spec_s[n - k] = spec_s[k].conj();
            }
            let (a, b, c) = (
                fft::synthesize(&spec_xx),
                fft::synthesize(&spec_xs),
                fft::synthesize(&spec_s),
            );
            xx[j * n..(j + 1) * n].copy_from_slice(&a);
            xs[j * n..(j + 1) * n].copy_from_slice(&b);
            s[j * n..(j + 1) * n].copy_from_slice(&c);
            if j == 0 {
                let mut spec_x = vec![Complex64::new(0.0, 0.0); n];
                for k in 1..=kk {
                    let (ch, _) = profile(k, 0.0);
                    spec_x[k] = Complex64::new(0.0, k as f64) * xi.coeff(k as i64) * ch;
                    spec_x[n - k] = spec_x[k].conj();
                }
                x_bottom = fft::synthesize(&spec_x);
            }
            if j == m {
                sigma_top = c;
            }
        }
        Lift {
            xx,
            xs,
            s,
            x_bottom,
            sigma_top,
        }
    }
}

/// First and second x-derivatives of every level, two levels per complex FFT.
fn level_derivatives(psi: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let levels = psi.len() / n;
    let (fwd, inv) = fft::plans(n);
    let mut dx = vec![0.0; psi.len()];
    let mut dxx = vec![0.0; psi.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut b1 = vec![Complex64::new(0.0, 0.0); n];
    let inv_n = 1.0 / n as f64;
    let mut j = 0;
    while j < levels {
        let second = j + 1 < levels;
        for i in 0..n {
            let im = if second { psi[(j + 1) * n + i] } else { 0.0 };
            buf[i] = Complex64::new(psi[j * n + i], im);
        }
        fwd.process(&mut buf);
        for i in 0..n {
            let k = fft::wavenumber(i, n);
            let kf = k as f64;
            let d1 = if 2 * k.unsigned_abs() as usize == n { 0.0 } else { kf };
            b1[i] = buf[i] * Complex64::new(0.0, d1 * inv_n);
            buf[i] *= -kf * kf * inv_n;
        }
        inv.process(&mut b1);
        inv.process(&mut buf);
        for i in 0..n {
            dx[j * n + i] = b1[i].re;
            dxx[j * n + i] = buf[i].re;
            if second {
                dx[(j + 1) * n + i] = b1[i].im;
                dxx[(j + 1) * n + i] = buf[i].im;
            }
        }
        j += 2;
    }
    (dx, dxx)
}

/// Exact inverse of the constant-depth operator, one dense block per Fourier mode.
struct FlatPreconditioner {
    n: usize,
    m: usize,
    /// Inverse blocks for modes `0..=n/2`, each `(M+1)²`, row-major.
    inverses: Vec<Vec<f64>>,
}

type PreKey = (usize, usize, u64, TopKind);

thread_local! {
    static PRECONDITIONERS: RefCell<HashMap<PreKey, Rc<FlatPreconditioner>>> =
        RefCell::new(HashMap::new());
}

impl FlatPreconditioner {
    fn cached(
        n: usize,
        m: usize,
        dbar: f64,
        kind: TopKind,
        dmat: &DMatrix<f64>,
        d2mat: &DMatrix<f64>,
    ) -> Rc<Self> {
        let key = (n, m, dbar.to_bits(), kind);
        PRECONDITIONERS.with(|cell| {
            let mut map = cell.borrow_mut();
            if let Some(p) = map.get(&key) {
                return p.clone();
            }
            if map.len() > 32 {
                map.clear();
            }
            let p = Rc::new(Self::build(n, m, dbar, kind, dmat, d2mat));
            map.insert(key, p.clone());
            p
        })
    }

    fn build(
        n: usize,
        m: usize,
        dbar: f64,
        kind: TopKind,
        dmat: &DMatrix<f64>,
        d2mat: &DMatrix<f64>,
    ) -> Self {
        let mut inverses = Vec::with_capacity(n / 2 + 1);
        for k in 0..=n / 2 {
            let kf = k as f64;
            let mut a = DMatrix::zeros(m + 1, m + 1);
            for j in 1..m {
                for l in 0..=m {
                    a[(j, l)] = d2mat[(j, l)];
                }
                a[(j, j)] -= dbar * dbar * kf * kf;
            }
            for l in 0..=m {
                a[(0, l)] = -dmat[(0, l)];
            }
            match kind {
                TopKind::Dirichlet => a[(m, m)] = 1.0,
                TopKind::HalfSpace => {
                    for l in 0..=m {
                        a[(m, l)] = dmat[(m, l)] / dbar;
                    }
                    a[(m, m)] += kf + if k == 0 { 1.0 } else { 0.0 };
                }
            }
            let inv = a.try_inverse().expect("flat mapped operator is invertible");
            let mut rows = vec![0.0; (m + 1) * (m + 1)];
            for r in 0..=m {
                for c in 0..=m {
                    rows[r * (m + 1) + c] = inv[(r, c)];
                }
            }
            inverses.push(rows);
        }
        FlatPreconditioner { n, m, inverses }
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let levels = m + 1;
        let half = n / 2 + 1;
        let (fwd, inv) = fft::plans(n);
        // spectra[j][k] for k in 0..=n/2.
        let mut spectra = vec![Complex64::new(0.0, 0.0); levels * half];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut j = 0;
        while j < levels {
            let second = j + 1 < levels;
            for i in 0..n {
                let im = if second { r[(j + 1) * n + i] } else { 0.0 };
                buf[i] = Complex64::new(r[j * n + i], im);
            }
            fwd.process(&mut buf);
            for k in 0..half {
                let zk = buf[k];
                let zm = buf[(n - k) % n].conj();
                spectra[j * half + k] = 0.5 * (zk + zm);
                if second {
                    spectra[(j + 1) * half + k] = Complex64::new(0.0, -0.5) * (zk - zm);
                }
            }
            j += 2;
        }
        let mut solved = vec![Complex64::new(0.0, 0.0); levels * half];
        for k in 0..half {
            let inv_k = &self.inverses[k];
            for row in 0..levels {
                let mut acc = Complex64::new(0.0, 0.0);
                let coeffs = &inv_k[row * levels..(row + 1) * levels];
                for (l, &w) in coeffs.iter().enumerate() {
                    acc += w * spectra[l * half + k];
                }
                solved[row * half + k] = acc;
            }
        }
        let inv_n = 1.0 / n as f64;
        let mut j = 0;
        while j < levels {
            let second = j + 1 < levels;
            for i in 0..n {
                let (k, conj) = if i < half { (i, false) } else { (n - i, true) };
                let mut a = solved[j * half + k];
                let mut b = if second {
                    solved[(j + 1) * half + k]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                if conj {
                    a = a.conj();
                    b = b.conj();
                }
                buf[i] = (a + Complex64::new(0.0, 1.0) * b) * inv_n;
            }
            inv.process(&mut buf);
            for i in 0..n {
                out[j * n + i] = buf[i].re;
                if second {
                    out[(j + 1) * n + i] = buf[i].im;
                }
            }
            j += 2;
        }
    }
}
