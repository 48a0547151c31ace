//! The Hamiltonian `H = Ĥ + H̃` of steady waves in a stream of speed `c`, its
//! gradient, and the Hessian at the trivial state.
//!
//! With `N_η·∇ = −η_x ∂_x + ∂_y` and `Φ_b` evaluated on `y = η(x)`:
//!
//! ```text
//! Ĥ = ∫ ½ ξ G(η;b) ξ − c ξ η_x + ½ g η²
//! H̃ = ∫ c ξ N_η·∇Φ_b + (c²/2) Φ_b N_η·∇Φ_b − c² Φ_b η_x
//! ```
//!
//! Linear algebra uses real coordinates (see [`PeriodicField::to_real_vec`]),
//! in which the `L²` pairing is `π` times the Euclidean dot product. Gradients
//! and Hessians are therefore represented by the same coordinate map as states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::bottom_current::{solve_bottom_trace, HarmonicCurrent};
use crate::dirichlet_neumann::{dn_apply_with, DnOptions, DnSolveReport, FluidDomain};
use crate::error::{Error, Result};
use crate::fft;
use crate::fourier::{integrate, PeriodicField, SpectralConfig, State};
use crate::linalg;

/// Gravity, depth, stream speed and bottom.
#[derive(Clone, Debug)]
pub struct PhysicalParams {
    pub g: f64,
    pub h: f64,
    pub c: f64,
    pub b: PeriodicField,
    /// Drop `H̃`, leaving the traveling-wave Hamiltonian `Ĥ`.
    pub traveling_frame: bool,
}

impl PhysicalParams {
    pub fn new(g: f64, h: f64, c: f64, b: PeriodicField) -> Result<Self> {
        let p = PhysicalParams {
            g,
            h,
            c,
            b,
            traveling_frame: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Flat bottom `b = 0`.
    pub fn flat(config: SpectralConfig, g: f64, h: f64, c: f64) -> Result<Self> {
        Self::new(g, h, c, PeriodicField::zeros(config))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::Validation(format!("g must be positive, got {}", self.g)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Validation(format!("h must be positive, got {}", self.h)));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::Validation(format!(
                "c must be non-negative, got {}",
                self.c
            )));
        }
        let bmax = self.b.max_abs();
        if !(bmax < self.h) {
            return Err(Error::Validation(format!(
                "bottom amplitude {bmax} must stay below the depth {}",
                self.h
            )));
        }
        Ok(())
    }

    pub fn with_speed(&self, c: f64) -> Self {
        PhysicalParams { c, ..self.clone() }
    }

    pub fn with_bottom(&self, b: PeriodicField) -> Self {
        PhysicalParams { b, ..self.clone() }
    }

    /// `Φ_b` for this bottom.
    pub fn current(&self) -> Result<HarmonicCurrent> {
        if self.b.is_zero() {
            Ok(HarmonicCurrent::flat(*self.b.config(), self.h))
        } else {
            solve_bottom_trace(&self.b, self.h, 1e-13)
        }
    }

    fn uses_current(&self, current: &HarmonicCurrent) -> bool {
        !self.traveling_frame && self.c != 0.0 && !current.is_trivial()
    }
}

/// `c_k = sqrt(g tanh(hk)/k)`.
pub fn critical_speed(k: usize, g: f64, h: f64) -> f64 {
    assert!(k >= 1, "critical speeds are indexed from k = 1");
    let k = k as f64;
    (g * (h * k).tanh() / k).sqrt()
}

/// Eigenvalues `(λ⁺, λ⁻)` of `A_k(c) = [[g, ick], [−ick, |k| tanh(h|k|)]]`.
pub fn hessian_eigenvalues(k: i64, c: f64, g: f64, h: f64) -> (f64, f64) {
    let t = flat_symbol(k, h);
    let ck = c * k as f64;
    let mid = 0.5 * (g + t);
    let rad = 0.5 * ((g - t).powi(2) + 4.0 * ck * ck).sqrt();
    let plus = mid + rad;
    // The smaller root via the product keeps accuracy near det A_k = 0.
    let det = g * t - ck * ck;
    (plus, det / plus)
}

/// `det A_k(c) = g|k| tanh(h|k|) − (ck)²`.
pub fn hessian_determinant(k: i64, c: f64, g: f64, h: f64) -> f64 {
    g * flat_symbol(k, h) - (c * k as f64).powi(2)
}

fn flat_symbol(k: i64, h: f64) -> f64 {
    let k = k.abs() as f64;
    k * (h * k).tanh()
}

/// `Ĥ`, `H̃` and their sum.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HamiltonianParts {
    pub h_hat: f64,
    pub h_tilde: f64,
    pub total: f64,
}

/// Gradient together with quantities discarded by the zero-mean projection.
#[derive(Clone, Debug)]
pub struct GradientReport {
    pub d_eta: PeriodicField,
    pub d_xi: PeriodicField,
    pub eta_mean: f64,
    pub xi_mean: f64,
    pub dn: Option<DnSolveReport>,
}

/// Surface traces of `Φ_b` and its first derivatives on `y = η(x)`.
struct SurfaceCurrent {
    phi: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

fn surface_current(eta_grid: &[f64], current: &HarmonicCurrent) -> Result<SurfaceCurrent> {
    let x = fft::grid_points(eta_grid.len());
    let vals = current.eval_curve(&x, eta_grid, &[(0, 0), (1, 0), (0, 1)])?;
    Ok(SurfaceCurrent {
        phi: vals.get(0, 0).to_vec(),
        p: vals.get(1, 0).to_vec(),
        q: vals.get(0, 1).to_vec(),
    })
}

fn aligned(u: &State, params: &PhysicalParams) -> PeriodicField {
    if params.b.config() == u.config() {
        params.b.clone()
    } else {
        params.b.resample(*u.config())
    }
}

/// `G(η;b)ξ`; the flat symbol is used when `η = b = 0`.
pub fn dn_operator(
    eta: &PeriodicField,
    xi: &PeriodicField,
    b: &PeriodicField,
    h: f64,
) -> Result<(PeriodicField, Option<DnSolveReport>)> {
    if xi.is_zero() {
        return Ok((PeriodicField::zeros(*xi.config()), None));
    }
    if eta.is_zero() && b.is_zero() {
        return Ok((xi.flat_dn_apply(h), None));
    }
    let domain = FluidDomain::new(eta.clone(), b.clone(), h)?;
    let (out, report) = dn_apply_with(&domain, xi, &DnOptions::default())?;
    Ok((out, Some(report)))
}

pub fn hamiltonian_parts(
    u: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<HamiltonianParts> {
    let b = aligned(u, params);
    let (gxi, _) = dn_operator(&u.eta, &u.xi, &b, params.h)?;
    let c = params.c;
    let eta_x = u.eta.derivative();
    let h_hat = 0.5 * u.xi.inner(&gxi) - c * u.xi.inner(&eta_x) + 0.5 * params.g * u.eta.inner(&u.eta);
    let h_tilde = if params.uses_current(current) {
        let eta = u.eta.to_grid();
        let xi = u.xi.to_grid();
        let ex = eta_x.to_grid();
        let s = surface_current(&eta, current)?;
        let integrand: Vec<f64> = (0..eta.len())
            .map(|j| {
                let flux = s.q[j] - ex[j] * s.p[j];
                c * xi[j] * flux + 0.5 * c * c * s.phi[j] * flux - c * c * s.phi[j] * ex[j]
            })
            .collect();
        integrate(&integrand)
    } else {
        0.0
    };
    Ok(HamiltonianParts {
        h_hat,
        h_tilde,
        total: h_hat + h_tilde,
    })
}

/// `H(η, ξ; b, c)` with the additive constant dropped.
pub fn hamiltonian_value(u: &State, params: &PhysicalParams, current: &HarmonicCurrent) -> Result<f64> {
    Ok(hamiltonian_parts(u, params, current)?.total)
}

/// The dropped constant `C = π h c² + (c²/2) ∫ b'(x) Φ_b(x, −h + b(x)) dx`.
pub fn energy_constant(params: &PhysicalParams, current: &HarmonicCurrent) -> f64 {
    let c2 = params.c * params.c;
    let base = std::f64::consts::PI * params.h * c2;
    if current.is_trivial() {
        return base;
    }
    let trace = current.bottom_trace();
    let bp = current.b.derivative().to_grid_n(trace.len());
    let integrand: Vec<f64> = bp.iter().zip(trace).map(|(d, f)| d * f).collect();
    base + 0.5 * c2 * integrate(&integrand)
}

/// `(∂_η H, ∂_ξ H)`, projected to zero mean.
pub fn gradient(
    u: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<(PeriodicField, PeriodicField)> {
    let r = gradient_with_report(u, params, current)?;
    Ok((r.d_eta, r.d_xi))
}

pub fn gradient_state(u: &State, params: &PhysicalParams, current: &HarmonicCurrent) -> Result<State> {
    let (d_eta, d_xi) = gradient(u, params, current)?;
    Ok(State { eta: d_eta, xi: d_xi })
}

pub fn gradient_with_report(
    u: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<GradientReport> {
    let cfg = *u.config();
    let b = aligned(u, params);
    let c = params.c;
    let (gxi, dn) = dn_operator(&u.eta, &u.xi, &b, params.h)?;
    let eta = u.eta.to_grid();
    let ex = u.eta.derivative().to_grid();
    let xx = u.xi.derivative().to_grid();
    let gx = gxi.to_grid();
    let n = eta.len();
    let mut d_eta: Vec<f64> = (0..n)
        .map(|j| {
            let w = gx[j] + ex[j] * xx[j];
            c * xx[j] + params.g * eta[j] + 0.5 * xx[j] * xx[j] - 0.5 * w * w / (1.0 + ex[j] * ex[j])
        })
        .collect();
    let mut d_xi: Vec<f64> = (0..n).map(|j| gx[j] - c * ex[j]).collect();
    if params.uses_current(current) {
        let s = surface_current(&eta, current)?;
        for j in 0..n {
            let (p, q) = (s.p[j], s.q[j]);
            d_eta[j] += c * xx[j] * p + 0.5 * c * c * (p * p + q * q) + c * c * p;
            d_xi[j] += c * (q - ex[j] * p);
        }
    }
    let (d_eta, eta_mean) = PeriodicField::from_grid(cfg, &d_eta);
    let (d_xi, xi_mean) = PeriodicField::from_grid(cfg, &d_xi);
    Ok(GradientReport {
        d_eta,
        d_xi,
        eta_mean,
        xi_mean,
        dn,
    })
}

/// Gradient in real coordinates.
pub fn gradient_vec(u: &State, params: &PhysicalParams, current: &HarmonicCurrent) -> Result<Vec<f64>> {
    Ok(gradient_state(u, params, current)?.to_vec())
}

/// `|∇H(u)|_Y`.
pub fn residual_norm(u: &State, params: &PhysicalParams, current: &HarmonicCurrent) -> Result<f64> {
    Ok(gradient_state(u, params, current)?.norm_y())
}

/// Traces of `Φ_b` and its derivatives on `y = 0`.
struct LevelCurrent {
    phi: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    pxy: Vec<f64>,
    pyy: Vec<f64>,
    pyyy: Vec<f64>,
}

fn level_current(config: &SpectralConfig, current: &HarmonicCurrent) -> Result<LevelCurrent> {
    let n = config.grid_size();
    let x = fft::grid_points(n);
    let y = vec![0.0; n];
    let v = current.eval_curve(&x, &y, &[(0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (0, 3)])?;
    Ok(LevelCurrent {
        phi: v.get(0, 0).to_vec(),
        p: v.get(1, 0).to_vec(),
        q: v.get(0, 1).to_vec(),
        pxy: v.get(1, 1).to_vec(),
        pyy: v.get(0, 2).to_vec(),
        pyyy: v.get(0, 3).to_vec(),
    })
}

/// `(H̃₁(u), H̃₂(u))`, the first- and second-order terms of `H̃` about `u = 0`.
pub fn interaction_expansion(
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    u: &State,
) -> Result<(f64, f64)> {
    if !params.uses_current(current) {
        return Ok((0.0, 0.0));
    }
    let c = params.c;
    let c2 = c * c;
    let l = level_current(u.config(), current)?;
    let eta = u.eta.to_grid();
    let xi = u.xi.to_grid();
    let ex = u.eta.derivative().to_grid();
    let xx = u.xi.derivative().to_grid();
    let n = eta.len();
    let first: Vec<f64> = (0..n)
        .map(|j| {
            let (p, q) = (l.p[j], l.q[j]);
            c * q * xi[j] + c2 * p * eta[j] + 0.5 * c2 * (q * q + p * p) * eta[j]
        })
        .collect();
    let second: Vec<f64> = (0..n)
        .map(|j| {
            let (phi, p, q) = (l.phi[j], l.p[j], l.q[j]);
            c * p * eta[j] * xx[j]
                + 0.5 * c2 * (0.5 * phi * l.pyyy[j] + 1.5 * q * l.pyy[j]) * eta[j] * eta[j]
                - 0.5 * c2 * (p * q + phi * l.pxy[j] + 2.0 * q) * eta[j] * ex[j]
        })
        .collect();
    Ok((integrate(&first), integrate(&second)))
}

/// `D²H(0;b,c) = L(c) + T(b,c)` on the truncated basis.
#[derive(Clone, Debug)]
pub struct HessianAtZero {
    pub config: SpectralConfig,
    pub g: f64,
    pub h: f64,
    pub c: f64,
    /// `A_k(c)` for `k = 1..=K`, acting on `(η̂_k, ξ̂_k)`.
    pub blocks: Vec<[[Complex64; 2]; 2]>,
    /// `T(b,c)` in real coordinates.
    pub t: DMatrix<f64>,
}

impl HessianAtZero {
    pub fn block(&self, k: usize) -> [[Complex64; 2]; 2] {
        self.blocks[k - 1]
    }

    /// `L(c)` in real coordinates.
    pub fn l_matrix(&self) -> DMatrix<f64> {
        flat_hessian_matrix(&self.config, self.g, self.h, self.c)
    }

    /// `L(c) + T(b,c)` in real coordinates.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.l_matrix() + &self.t
    }

    pub fn apply(&self, v: &State) -> State {
        let x = nalgebra::DVector::from_vec(v.to_vec());
        let y = self.matrix() * x;
        State::from_vec(self.config, y.as_slice())
    }

    pub fn smallest_singular_value(&self) -> f64 {
        linalg::smallest_singular_value(&self.matrix())
    }
}

/// `L(c)` for the flat trivial state in real coordinates.
pub fn flat_hessian_matrix(config: &SpectralConfig, g: f64, h: f64, c: f64) -> DMatrix<f64> {
    let kk = config.n_modes;
    let m = 2 * kk;
    let mut l = DMatrix::zeros(2 * m, 2 * m);
    for k in 1..=kk {
        let (a, b) = (k - 1, kk + k - 1);
        let ck = c * k as f64;
        l[(a, a)] = g;
        l[(b, b)] = g;
        l[(m + a, m + a)] = flat_symbol(k as i64, h);
        l[(m + b, m + b)] = flat_symbol(k as i64, h);
        l[(a, m + b)] = ck;
        l[(m + b, a)] = ck;
        l[(b, m + a)] = -ck;
        l[(m + a, b)] = -ck;
    }
    l
}

/// The complex `2×2` block of a real-coordinate operator at mode `k`.
///
/// Column `j` is the `k`-th coefficient of the image of `e^{ikx} + e^{−ikx}`
/// placed in component `j`.
pub fn complex_block(matrix: &DMatrix<f64>, config: &SpectralConfig, k: usize) -> [[Complex64; 2]; 2] {
    let kk = config.n_modes;
    let m = 2 * kk;
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for col in 0..2 {
        let j = col * m + (k - 1);
        for row in 0..2 {
            let a = matrix[(row * m + k - 1, j)] * 2.0;
            let b = matrix[(row * m + kk + k - 1, j)] * 2.0;
            out[row][col] = Complex64::new(0.5 * a, -0.5 * b);
        }
    }
    out
}

/// Exact `A_k(c)`.
pub fn flat_block(k: usize, g: f64, h: f64, c: f64) -> [[Complex64; 2]; 2] {
    let ick = Complex64::new(0.0, c * k as f64);
    [
        [Complex64::new(g, 0.0), ick],
        [-ick, Complex64::new(flat_symbol(k as i64, h), 0.0)],
    ]
}

/// `G(0;b) − G(0;0)` in real coordinates; it acts on the `ξ` block only.
pub fn dn_difference_matrix(config: &SpectralConfig, b: &PeriodicField, h: f64) -> Result<DMatrix<f64>> {
    let m = config.field_dof();
    let mut out = DMatrix::zeros(m, m);
    if b.is_zero() {
        return Ok(out);
    }
    let b = b.resample(*config);
    let zero = PeriodicField::zeros(*config);
    let domain = FluidDomain::new(zero, b, h)?;
    let opts = DnOptions::default();
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        let xi = PeriodicField::from_real_vec(*config, &e);
        let (g, _) = dn_apply_with(&domain, &xi, &opts)?;
        let diff = g.axpy(-1.0, &xi.flat_dn_apply(h)).to_real_vec();
        for (i, v) in diff.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// `D²H̃₂(0)` in real coordinates.
pub fn interaction_hessian_matrix(
    config: &SpectralConfig,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<DMatrix<f64>> {
    let m = config.field_dof();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    if !params.uses_current(current) {
        return Ok(out);
    }
    let c = params.c;
    let c2 = c * c;
    let l = level_current(config, current)?;
    let n = l.phi.len();
    let flux: Vec<f64> = (0..n).map(|j| l.phi[j] * l.pxy[j] + l.q[j] * l.p[j]).collect();
    let flux_x = fft::differentiate(&flux);
    let q_x = fft::differentiate(&l.q);
    let alpha: Vec<f64> = (0..n)
        .map(|j| {
            0.5 * c2 * (0.5 * l.phi[j] * l.pyyy[j] + 1.5 * l.q[j] * l.pyy[j])
                + 0.25 * c2 * flux_x[j]
                + 0.5 * c2 * q_x[j]
        })
        .collect();
    for j in 0..2 * m {
        let mut e = vec![0.0; 2 * m];
        e[j] = 1.0;
        let v = State::from_vec(*config, &e);
        let eta = v.eta.to_grid();
        let xx = v.xi.derivative().to_grid();
        let d_eta: Vec<f64> = (0..n)
            .map(|i| 2.0 * alpha[i] * eta[i] + c * l.p[i] * xx[i])
            .collect();
        let p_eta: Vec<f64> = (0..n).map(|i| l.p[i] * eta[i]).collect();
        let d_xi: Vec<f64> = fft::differentiate(&p_eta).iter().map(|v| -c * v).collect();
        let col = State {
            eta: PeriodicField::from_grid(*config, &d_eta).0,
            xi: PeriodicField::from_grid(*config, &d_xi).0,
        }
        .to_vec();
        for (i, v) in col.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Assembles `D²H(0;b,c)` from the exact `A_k`, the second variation of `H̃₂`
/// and the bottom's change to the flat DN operator.
pub fn hessian_at_zero(params: &PhysicalParams, current: &HarmonicCurrent) -> Result<HessianAtZero> {
    let config = *params.b.config();
    let dn = dn_difference_matrix(&config, &params.b, params.h)?;
    hessian_at_zero_with(params, current, &dn)
}

/// As [`hessian_at_zero`], reusing a precomputed [`dn_difference_matrix`].
pub fn hessian_at_zero_with(
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    dn_difference: &DMatrix<f64>,
) -> Result<HessianAtZero> {
    let config = *params.b.config();
    let m = config.field_dof();
    let mut t = interaction_hessian_matrix(&config, params, current)?;
    let mut view = t.view_mut((m, m), (m, m));
    view += dn_difference;
    let blocks = (1..=config.n_modes)
        .map(|k| flat_block(k, params.g, params.h, params.c))
        .collect();
    Ok(HessianAtZero {
        config,
        g: params.g,
        h: params.h,
        c: params.c,
        blocks,
        t,
    })
}

/// Step used by the finite-difference Hessian for a direction `v`.
fn fd_step(u_base: &State, v: &State) -> f64 {
    let scale = v.eta.max_abs().max(v.xi.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    let base = 1.0 + u_base.eta.max_abs().max(u_base.xi.max_abs());
    1e-3 * base / scale
}

/// `D²H(u_base) v` from central differences of the gradient with one
/// Richardson step.
pub fn hessian_apply(
    u_base: &State,
    v: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<(PeriodicField, PeriodicField)> {
    let eps = fd_step(u_base, v);
    if eps == 0.0 {
        let z = PeriodicField::zeros(*u_base.config());
        return Ok((z.clone(), z));
    }
    let diff = |e: f64| -> Result<State> {
        let plus = gradient_state(&u_base.axpy(e, v), params, current)?;
        let minus = gradient_state(&u_base.axpy(-e, v), params, current)?;
        Ok(plus.axpy(-1.0, &minus).scale(0.5 / e))
    };
    let d1 = diff(eps)?;
    let d2 = diff(0.5 * eps)?;
    let r = d2.scale(4.0 / 3.0).axpy(-1.0 / 3.0, &d1);
    Ok((r.eta, r.xi))
}

pub fn hessian_apply_state(
    u_base: &State,
    v: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<State> {
    let (eta, xi) = hessian_apply(u_base, v, params, current)?;
    Ok(State { eta, xi })
}

/// Dense Jacobian of the real-coordinate gradient by central differences.
pub fn hessian_dense_fd(
    u_base: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    eps: f64,
) -> Result<DMatrix<f64>> {
    let cfg = *u_base.config();
    let base = u_base.to_vec();
    let n = base.len();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = base.clone();
        plus[j] += eps;
        let mut minus = base.clone();
        minus[j] -= eps;
        let gp = gradient_vec(&State::from_vec(cfg, &plus), params, current)?;
        let gm = gradient_vec(&State::from_vec(cfg, &minus), params, current)?;
        for i in 0..n {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * eps);
        }
    }
    Ok(out)
}

/// Per-evaluation diagnostic record.
#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub h: f64,
    pub h_hat: f64,
    pub h_tilde: f64,
    pub gradient_norm_y: f64,
    pub xi_mean_before_projection: f64,
    pub energy_constant: f64,
}

pub fn diagnostics(u: &State, params: &PhysicalParams, current: &HarmonicCurrent) -> Result<Diagnostics> {
    let parts = hamiltonian_parts(u, params, current)?;
    let g = gradient_with_report(u, params, current)?;
    Ok(Diagnostics {
        h: parts.total,
        h_hat: parts.h_hat,
        h_tilde: parts.h_tilde,
        gradient_norm_y: g.d_eta.sobolev_norm(u.config().s).hypot(g.d_xi.sobolev_norm(u.config().s)),
        xi_mean_before_projection: g.xi_mean,
        energy_constant: energy_constant(params, current),
    })
}
