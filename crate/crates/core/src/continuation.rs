//! Critical points of `H(·;b,c)` continued in parameters: the trivial branch
//! for `c` away from the critical speeds, the excluded neighbourhoods of the
//! `c_k`, and flat-bottom Stokes branches.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bottom_current::HarmonicCurrent;
use crate::error::{Error, Result};
use crate::fourier::{PeriodicField, SpectralConfig, State};
use crate::hamiltonian::{
    critical_speed, dn_difference_matrix, gradient_state, gradient_vec, hessian_apply_state,
    hessian_at_zero_with, hessian_dense_fd, HessianAtZero, PhysicalParams,
};
use crate::linalg;

/// A converged point of the trivial branch.
#[derive(Clone, Debug)]
pub struct ContinuationResult {
    pub u: State,
    pub residual_norm: f64,
    pub newton_iters: usize,
    /// Iterations of the fixed-point map before any Jacobian refresh.
    pub fixed_point_iters: usize,
    pub smallest_hessian_sv: f64,
    pub params: PhysicalParams,
}

#[derive(Clone, Copy, Debug)]
pub struct TrivialOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Shape constant of the excluded intervals.
    pub gamma: f64,
    /// Refuse speeds inside an excluded interval.
    pub check_region: bool,
}

impl Default for TrivialOptions {
    fn default() -> Self {
        TrivialOptions {
            tol: 1e-10,
            max_iters: 60,
            gamma: 1.0,
            check_region: true,
        }
    }
}

/// Excluded neighbourhood `(c_k − w_k, c_k + w_k)` of a critical speed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExcludedInterval {
    pub k: usize,
    pub c_k: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ExcludedInterval {
    pub fn contains(&self, c: f64) -> bool {
        self.half_width > 0.0 && c > self.lower && c < self.upper
    }
}

/// Intervals with `w_k = sqrt(b_norm / (γ k³))` for `k = 1..=k_max`, clipped to `[0, c_star]`.
///
/// Intervals lying entirely above `c_star` are dropped; empty intervals
/// (`b_norm = 0`) are kept with zero width.
pub fn admissible_region(
    b_norm: f64,
    g: f64,
    h: f64,
    c_star: f64,
    k_max: usize,
    gamma: f64,
) -> Vec<ExcludedInterval> {
    (1..=k_max)
        .filter_map(|k| {
            let c_k = critical_speed(k, g, h);
            let w = (b_norm / (gamma * (k as f64).powi(3))).sqrt();
            let lower = (c_k - w).max(0.0);
            let upper = (c_k + w).min(c_star);
            (lower <= c_star).then_some(ExcludedInterval {
                k,
                c_k,
                half_width: w,
                lower,
                upper,
            })
        })
        .collect()
}

pub fn is_admissible(c: f64, intervals: &[ExcludedInterval]) -> bool {
    intervals.iter().all(|iv| !iv.contains(c))
}

/// Fits `γ` so that the parabola `|b| = γ (c − c_1)²` passes where the
/// smallest singular value of `D²H(0;b,c)` equals `sqrt(|b|_{s+1})`.
///
/// `shape` is scaled by each entry of `amplitudes`; speeds are scanned on
/// both sides of `c_1` and the fitted values are averaged.
pub fn calibrate_gamma(
    template: &PhysicalParams,
    shape: &PeriodicField,
    amplitudes: &[f64],
    scan_points: usize,
) -> Result<f64> {
    let (g, h) = (template.g, template.h);
    let c1 = critical_speed(1, g, h);
    let c2 = critical_speed(2, g, h);
    let s = shape.config().s + 1.0;
    let mut fits = Vec::new();
    for &a in amplitudes {
        let b = shape.scale(a);
        let eps = b.sobolev_norm(s);
        let params = template.with_bottom(b.clone());
        let current = params.current()?;
        let dn = dn_difference_matrix(b.config(), &b, h)?;
        // Scan from c_1 outwards on each side until σ_min exceeds sqrt(ε).
        for dir in [-1.0, 1.0] {
            let reach = 0.5 * (c1 - c2);
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..=scan_points {
                let c = c1 + dir * reach * i as f64 / scan_points as f64;
                let hz = hessian_at_zero_with(&params.with_speed(c), &current, &dn)?;
                let sv = hz.smallest_singular_value() - eps.sqrt();
                if let Some((cp, sp)) = prev {
                    if sp < 0.0 && sv >= 0.0 {
                        let cross = cp + (c - cp) * (-sp) / (sv - sp);
                        fits.push(eps / (cross - c1).powi(2));
                        break;
                    }
                }
                prev = Some((c, sv));
            }
        }
    }
    if fits.is_empty() {
        return Err(Error::Validation(
            "no crossing found while calibrating gamma; widen the scan".into(),
        ));
    }
    Ok(fits.iter().sum::<f64>() / fits.len() as f64)
}

/// Dense `LU` of a Hessian used as a fixed chord matrix.
struct Chord {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Chord {
    fn new(m: DMatrix<f64>) -> Self {
        Chord { lu: m.lu() }
    }

    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        self.lu
            .solve(&DVector::from_column_slice(rhs))
            .map(|x| x.as_slice().to_vec())
    }
}

/// `σ_min / max|M|` below which `D²H(0)` counts as singular.
const SINGULAR_RATIO: f64 = 1e-13;

fn singular_hessian(sv: f64, tol: f64) -> Error {
    Error::Convergence {
        what: "trivial continuation (singular Hessian at zero)",
        iterations: 0,
        residual: sv,
        tol,
    }
}

/// The continuation `u_b` of the trivial solution for fixed `(b, c)`.
pub fn continue_trivial(
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    opts: &TrivialOptions,
) -> Result<ContinuationResult> {
    let cfg = *params.b.config();
    if params.b.is_zero() {
        let hz = hessian_at_zero_with(params, current, &DMatrix::zeros(cfg.field_dof(), cfg.field_dof()))?;
        let sv = hz.smallest_singular_value();
        if !(sv > SINGULAR_RATIO * hz.matrix().abs().max()) {
            return Err(singular_hessian(sv, opts.tol));
        }
        return Ok(ContinuationResult {
            u: State::zeros(cfg),
            residual_norm: 0.0,
            newton_iters: 0,
            fixed_point_iters: 0,
            smallest_hessian_sv: sv,
            params: params.clone(),
        });
    }
    let dn = dn_difference_matrix(&cfg, &params.b, params.h)?;
    let hz = hessian_at_zero_with(params, current, &dn)?;
    continue_trivial_from(params, current, &hz, &State::zeros(cfg), opts)
}

/// Checks `c` against the excluded intervals built from `|b|_{s+1}`.
pub fn check_admissible(params: &PhysicalParams, gamma: f64) -> Result<()> {
    let cfg = params.b.config();
    let b_norm = params.b.sobolev_norm(cfg.s + 1.0);
    let region = admissible_region(b_norm, params.g, params.h, f64::INFINITY, cfg.n_modes, gamma);
    if let Some(iv) = region.iter().find(|iv| iv.contains(params.c)) {
        return Err(Error::Inadmissible {
            c: params.c,
            k: iv.k,
            lower: iv.lower,
            upper: iv.upper,
        });
    }
    Ok(())
}

/// Runs the fixed-point map `u ↦ u − D²H(0)⁻¹ ∇H(u)` from `u0`, refreshing the
/// chord matrix with a finite-difference Jacobian if the contraction stalls.
pub fn continue_trivial_from(
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    hessian: &HessianAtZero,
    u0: &State,
    opts: &TrivialOptions,
) -> Result<ContinuationResult> {
    let cfg = *params.b.config();
    let m0 = hessian.matrix();
    let sv = linalg::smallest_singular_value(&m0);
    if opts.check_region {
        check_admissible(params, opts.gamma)?;
    }
    if !(sv > SINGULAR_RATIO * m0.abs().max()) {
        return Err(singular_hessian(sv, opts.tol));
    }
    let mut chord = Chord::new(m0);
    let mut u = u0.clone();
    let mut g = gradient_state(&u, params, current)?;
    let mut res = g.norm_y();
    let mut iters = 0;
    let mut fixed_point_iters = 0;
    let mut refreshed = false;
    let mut stalls = 0;
    while res >= opts.tol {
        if iters >= opts.max_iters || !res.is_finite() {
            return Err(Error::Convergence {
                what: "trivial continuation",
                iterations: iters,
                residual: res,
                tol: opts.tol,
            });
        }
        let step = chord.solve(&g.to_vec()).ok_or(Error::Convergence {
            what: "trivial continuation (singular chord matrix)",
            iterations: iters,
            residual: res,
            tol: opts.tol,
        })?;
        u = u.axpy(-1.0, &State::from_vec(cfg, &step));
        g = gradient_state(&u, params, current)?;
        let next = g.norm_y();
        iters += 1;
        if !refreshed {
            fixed_point_iters += 1;
        }
        stalls = if next > 0.5 * res { stalls + 1 } else { 0 };
        res = next;
        if stalls >= 2 && !refreshed && res >= opts.tol {
            chord = Chord::new(hessian_dense_fd(&u, params, current, 1e-6)?);
            refreshed = true;
            stalls = 0;
        }
    }
    Ok(ContinuationResult {
        u,
        residual_norm: res,
        newton_iters: iters,
        fixed_point_iters,
        smallest_hessian_sv: sv,
        params: params.clone(),
    })
}

/// First fixed-point iterate `−D²H(0)⁻¹ ∇H(0)`.
pub fn linear_response(
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    hessian: &HessianAtZero,
) -> Result<State> {
    let cfg = *params.b.config();
    let g = gradient_vec(&State::zeros(cfg), params, current)?;
    let x = Chord::new(hessian.matrix())
        .solve(&g)
        .ok_or(Error::Convergence {
            what: "linear response (singular Hessian)",
            iterations: 0,
            residual: f64::INFINITY,
            tol: 0.0,
        })?;
    Ok(State::from_vec(cfg, &x).scale(-1.0))
}

/// One accepted point of a Stokes branch.
#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub c: f64,
    /// `|η|_∞`.
    pub amplitude: f64,
    pub u: State,
    pub orbit_nondegeneracy: f64,
    pub arclength: f64,
    pub residual: f64,
    /// `|D²H(u) ∂_x u|_Y`, which vanishes along the orbit.
    pub tangent_residual: f64,
    pub phase_residual: f64,
    pub corrector_iters: usize,
    pub fourier_tail: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StokesOptions {
    pub steps: usize,
    pub ds: f64,
    /// `|η|_∞` of the starting point.
    pub start_amplitude: f64,
    pub tol: f64,
    pub max_corrector_iters: usize,
    /// Stop once `|η|_∞` reaches this value.
    pub max_amplitude: Option<f64>,
    /// Fraction of energy allowed in the top quarter of modes.
    pub tail_threshold: f64,
    pub fd_eps: f64,
}

impl Default for StokesOptions {
    fn default() -> Self {
        StokesOptions {
            steps: 20,
            ds: 0.005,
            start_amplitude: 1e-3,
            tol: 1e-10,
            max_corrector_iters: 25,
            max_amplitude: None,
            tail_threshold: 1e-8,
            fd_eps: 1e-6,
        }
    }
}

/// Null vector of `A_k(c_k)` in real coordinates: `η = cos kx`, `ξ = −(g/(c_k k)) sin kx`.
pub fn kernel_direction(config: SpectralConfig, k: usize, g: f64, h: f64) -> State {
    let ck = critical_speed(k, g, h);
    State {
        eta: PeriodicField::cosine(config, k, 1.0),
        xi: PeriodicField::sine(config, k, -g / (ck * k as f64)),
    }
}

/// Share of `Σ|ĉ_k|²` carried by modes above `3K/4`.
pub fn fourier_tail(u: &State) -> f64 {
    let kk = u.config().n_modes;
    let cut = (3 * kk) / 4;
    let (mut top, mut all) = (0.0, 0.0);
    for f in [&u.eta, &u.xi] {
        for k in 1..=kk {
            let e = f.coeff(k as i64).norm_sqr();
            all += e;
            if k > cut {
                top += e;
            }
        }
    }
    if all == 0.0 {
        0.0
    } else {
        top / all
    }
}

/// Smallest singular value of `D²H(u_c)` restricted to `W = {w : ⟨w, ∂_x u_c⟩ = 0}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Nondegeneracy {
    pub value: f64,
    /// Largest asymmetry of the finite-difference Jacobian, a proxy for its noise.
    pub fd_noise: f64,
    pub ill_conditioned: bool,
}

/// Restriction of `jacobian` to the orthogonal complement of `direction`.
pub fn restrict_to_complement(jacobian: &DMatrix<f64>, direction: &[f64]) -> DMatrix<f64> {
    let n = direction.len();
    let q = complement_basis(direction);
    let qt_j_q = q.transpose() * jacobian * &q;
    debug_assert_eq!(qt_j_q.nrows(), n - 1);
    qt_j_q
}

/// Orthonormal basis of the complement of `direction`, as columns.
pub fn complement_basis(direction: &[f64]) -> DMatrix<f64> {
    let n = direction.len();
    let norm = linalg::norm(direction);
    let t: Vec<f64> = direction.iter().map(|v| v / norm).collect();
    // Householder reflector sending t to ±e_0; its remaining columns span t⊥.
    let sign = if t[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut w = t.clone();
    w[0] += sign;
    let wn2 = linalg::dot(&w, &w);
    let mut q = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        let coef = 2.0 * w[j] / wn2;
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            q[(i, j - 1)] = e - coef * w[i];
        }
    }
    q
}

pub fn orbit_nondegeneracy(
    u_c: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<Nondegeneracy> {
    let j = hessian_dense_fd(u_c, params, current, 1e-6)?;
    nondegeneracy_from_jacobian(u_c, &j)
}

/// As [`orbit_nondegeneracy`], from an existing Jacobian at `u_c`.
pub fn nondegeneracy_from_jacobian(u_c: &State, jacobian: &DMatrix<f64>) -> Result<Nondegeneracy> {
    let fd_noise = (jacobian - jacobian.transpose()).abs().max();
    let value = if u_c.is_zero() {
        linalg::smallest_singular_value(jacobian)
    } else {
        let t = u_c.derivative().to_vec();
        linalg::smallest_singular_value(&restrict_to_complement(jacobian, &t))
    };
    Ok(Nondegeneracy {
        value,
        fd_noise,
        ill_conditioned: fd_noise >= value,
    })
}

/// `∇H(u; b, c)` in real coordinates and its `c`-derivative.
fn gradient_and_c_derivative(
    u: &State,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = gradient_vec(u, params, current)?;
    let e = 1e-6;
    let gp = gradient_vec(u, &params.with_speed(params.c + e), current)?;
    let gm = gradient_vec(u, &params.with_speed((params.c - e).max(0.0)), current)?;
    let de = params.c + e - (params.c - e).max(0.0);
    let dc = gp.iter().zip(&gm).map(|(a, b)| (a - b) / de).collect();
    Ok((g, dc))
}

struct Corrected {
    u: State,
    c: f64,
    iters: usize,
    residual: f64,
}

/// Chord Newton for `∇H(u;c) + μ t = 0`, `⟨u, t⟩ = 0`, `⟨n_u, u − u*⟩ + n_c (c − c*) = 0`.
///
/// `t` is the phase direction, `(n_u, n_c)` the normal of the constraint
/// hyperplane through `(u*, c*)`, and `(u, c)` the starting guess.
#[allow(clippy::too_many_arguments)]
fn correct(
    jacobian: &DMatrix<f64>,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    guess: (&State, f64),
    anchor: (&[f64], f64),
    phase: &[f64],
    normal: (&[f64], f64),
    opts: &StokesOptions,
) -> Result<Corrected> {
    let cfg = *guess.0.config();
    let n = phase.len();
    let (mut u, mut c) = (guess.0.to_vec(), guess.1);
    let (_, dc) = gradient_and_c_derivative(&State::from_vec(cfg, &u), &params.with_speed(c), current)?;
    let mut big = DMatrix::zeros(n + 2, n + 2);
    big.view_mut((0, 0), (n, n)).copy_from(jacobian);
    for i in 0..n {
        big[(i, n)] = dc[i];
        big[(i, n + 1)] = phase[i];
        big[(n, i)] = phase[i];
        big[(n + 1, i)] = normal.0[i];
    }
    big[(n + 1, n)] = normal.1;
    let lu = big.lu();
    let mut mu = 0.0;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_corrector_iters {
        let state = State::from_vec(cfg, &u);
        let g = gradient_vec(&state, &params.with_speed(c), current)?;
        residual = gradient_state(&state, &params.with_speed(c), current)?.norm_y();
        let mut rhs = vec![0.0; n + 2];
        for i in 0..n {
            rhs[i] = -(g[i] + mu * phase[i]);
        }
        rhs[n] = -linalg::dot(&u, phase);
        let du: Vec<f64> = u.iter().zip(anchor.0).map(|(a, b)| a - b).collect();
        rhs[n + 1] = -(linalg::dot(normal.0, &du) + normal.1 * (c - anchor.1));
        let constraint = rhs[n].abs().max(rhs[n + 1].abs());
        if residual < opts.tol && constraint < opts.tol {
            return Ok(Corrected {
                u: state,
                c,
                iters: it,
                residual,
            });
        }
        if !residual.is_finite() {
            break;
        }
        let step = lu
            .solve(&DVector::from_vec(rhs))
            .ok_or(Error::Convergence {
                what: "branch corrector (singular bordered matrix)",
                iterations: it,
                residual,
                tol: opts.tol,
            })?;
        for i in 0..n {
            u[i] += step[i];
        }
        c += step[n];
        mu += step[n + 1];
    }
    Err(Error::Convergence {
        what: "branch corrector",
        iterations: opts.max_corrector_iters,
        residual,
        tol: opts.tol,
    })
}

/// Traces the Stokes branch bifurcating from `(0, c_k)` over a flat bottom.
///
/// The first point is corrected at fixed projection on the kernel direction;
/// later points use a secant predictor and a pseudo-arclength corrector. Each
/// corrector reuses the Jacobian of the previous accepted point, and the step
/// is halved on failure. Tracing stops early when the Fourier tail exceeds
/// `tail_threshold` or `|η|_∞` reaches `max_amplitude`.
pub fn stokes_branch(
    k: usize,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    opts: &StokesOptions,
) -> Result<Vec<BranchPoint>> {
    if !params.b.is_zero() {
        return Err(Error::Validation("Stokes branches require a flat bottom".into()));
    }
    let cfg = *params.b.config();
    if k == 0 || 4 * k > cfg.n_modes {
        return Err(Error::Validation(format!(
            "branch wavenumber {k} must satisfy 1 <= k <= K/4 = {}",
            cfg.n_modes / 4
        )));
    }
    let ck = critical_speed(k, params.g, params.h);
    let v = kernel_direction(cfg, k, params.g, params.h);
    let v_vec = v.to_vec();
    let v_unit: Vec<f64> = {
        let nv = linalg::norm(&v_vec);
        v_vec.iter().map(|x| x / nv).collect()
    };
    // First point: fixed projection onto the kernel direction.
    let u0 = v.scale(opts.start_amplitude);
    let p0 = params.with_speed(ck);
    let j0 = hessian_dense_fd(&u0, &p0, current, opts.fd_eps)?;
    let phase0 = u0.derivative().to_vec();
    let first = correct(
        &j0,
        params,
        current,
        (&u0, ck),
        (&u0.to_vec(), ck),
        &phase0,
        (&v_unit, 0.0),
        opts,
    )?;
    let mut points = Vec::new();
    let mut jac = hessian_dense_fd(&first.u, &params.with_speed(first.c), current, opts.fd_eps)?;
    points.push(accept(first, &jac, params, current, 0.0)?);
    // Tangent at the first point: along the kernel direction, no change in c.
    let mut tangent: (Vec<f64>, f64) = (v_unit.clone(), 0.0);
    let mut ds = opts.ds;
    while points.len() < opts.steps {
        let last = points.last().unwrap();
        if let Some(max) = opts.max_amplitude {
            if last.amplitude >= max {
                break;
            }
        }
        if last.fourier_tail > opts.tail_threshold {
            break;
        }
        let base = last.u.to_vec();
        let pred_u: Vec<f64> = base.iter().zip(&tangent.0).map(|(a, t)| a + ds * t).collect();
        let pred_c = last.c + ds * tangent.1;
        let pred = State::from_vec(cfg, &pred_u);
        let phase = last.u.derivative().to_vec();
        let anchor: Vec<f64> = pred_u.clone();
        match correct(
            &jac,
            params,
            current,
            (&pred, pred_c),
            (&anchor, pred_c),
            &phase,
            (&tangent.0, tangent.1),
            opts,
        ) {
            Ok(next) => {
                let du: Vec<f64> = next.u.to_vec().iter().zip(&base).map(|(a, b)| a - b).collect();
                let dcv = next.c - last.c;
                let len = (linalg::dot(&du, &du) + dcv * dcv).sqrt();
                tangent = (du.iter().map(|x| x / len).collect(), dcv / len);
                let arc = last.arclength + len;
                jac = hessian_dense_fd(&next.u, &params.with_speed(next.c), current, opts.fd_eps)?;
                points.push(accept(next, &jac, params, current, arc)?);
                ds = opts.ds;
            }
            Err(e) => {
                if ds < opts.ds / 16.0 {
                    return Err(e);
                }
                ds *= 0.5;
            }
        }
    }
    Ok(points)
}

const TARGET_ITERS: usize = 20;

/// The branch point with `|η|_∞ = amplitude`, located by tracing the branch
/// and then correcting at a fixed projection on the kernel direction.
pub fn stokes_wave(
    k: usize,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    amplitude: f64,
    opts: &StokesOptions,
) -> Result<BranchPoint> {
    let trace = StokesOptions {
        max_amplitude: Some(amplitude),
        steps: opts.steps.max(2),
        ..*opts
    };
    let points = stokes_branch(k, params, current, &trace)?;
    let last = points.last().expect("branch has a first point");
    let cfg = *params.b.config();
    let v = kernel_direction(cfg, k, params.g, params.h).to_vec();
    let nv = linalg::norm(&v);
    let v_unit: Vec<f64> = v.iter().map(|x| x / nv).collect();
    let mut jac = hessian_dense_fd(&last.u, &params.with_speed(last.c), current, opts.fd_eps)?;
    let (mut u, mut c) = (last.u.clone(), last.c);
    // Secant iteration on the kernel projection for `|η|_∞ − amplitude`.
    let mut prev: Option<(f64, f64)> = None;
    let mut proj = linalg::dot(&u.to_vec(), &v_unit);
    let mut amp = last.amplitude;
    for _ in 0..TARGET_ITERS {
        let err = amp - amplitude;
        let next_proj = match prev {
            Some((p0, e0)) if (err - e0).abs() > 0.0 => proj - err * (proj - p0) / (err - e0),
            _ => proj * amplitude / amp,
        };
        prev = Some((proj, err));
        let scale = next_proj / proj;
        proj = next_proj;
        let anchor: Vec<f64> = v_unit.iter().map(|x| proj * x).collect();
        let phase = u.derivative().to_vec();
        let guess = u.scale(scale);
        let next = correct(
            &jac,
            params,
            current,
            (&guess, c),
            (&anchor, c),
            &phase,
            (&v_unit, 0.0),
            opts,
        )?;
        u = next.u;
        c = next.c;
        amp = u.eta.max_abs();
        if (amp - amplitude).abs() <= 1e-6 * amplitude {
            jac = hessian_dense_fd(&u, &params.with_speed(c), current, opts.fd_eps)?;
            let arc = last.arclength;
            return accept(
                Corrected {
                    u,
                    c,
                    iters: next.iters,
                    residual: next.residual,
                },
                &jac,
                params,
                current,
                arc,
            );
        }
    }
    Err(Error::Convergence {
        what: "Stokes wave amplitude targeting",
        iterations: TARGET_ITERS,
        residual: (amp - amplitude).abs(),
        tol: 1e-6 * amplitude,
    })
}

fn accept(
    p: Corrected,
    jac: &DMatrix<f64>,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    arclength: f64,
) -> Result<BranchPoint> {
    let pc = params.with_speed(p.c);
    let nd = nondegeneracy_from_jacobian(&p.u, jac)?;
    let t = p.u.derivative();
    let tangent_residual = hessian_apply_state(&p.u, &t, &pc, current)?.norm_y();
    let phase_residual = p.u.inner(&t).abs();
    Ok(BranchPoint {
        c: p.c,
        amplitude: p.u.eta.max_abs(),
        fourier_tail: fourier_tail(&p.u),
        u: p.u,
        orbit_nondegeneracy: nd.value,
        arclength,
        residual: p.residual,
        tangent_residual,
        phase_residual,
        corrector_iters: p.iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_widths() {
        assert!(admissible_region(0.0, 1.0, 1.0, 2.0, 8, 1.0)
            .iter()
            .all(|iv| iv.half_width == 0.0 && !iv.contains(iv.c_k)));
        let r = admissible_region(1e-4, 1.0, 1.0, 2.0, 8, 1.0);
        assert!((r[0].half_width / r[7].half_width - 8f64.powf(1.5)).abs() < 1e-9);
        let r4 = admissible_region(4e-4, 1.0, 1.0, 2.0, 8, 1.0);
        for (a, b) in r.iter().zip(&r4) {
            assert!((b.half_width / a.half_width - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_direction_is_null() {
        let cfg = SpectralConfig::with_modes(8);
        let (g, h) = (1.0, 1.0);
        for k in 1..=3 {
            let l = crate::hamiltonian::flat_hessian_matrix(&cfg, g, h, critical_speed(k, g, h));
            let v = DVector::from_vec(kernel_direction(cfg, k, g, h).to_vec());
            assert!((l * v).norm() < 1e-10);
        }
    }

    #[test]
    fn complement_basis_is_orthonormal() {
        let d = vec![0.3, -1.0, 2.0, 0.5];
        let q = complement_basis(&d);
        let qtq = q.transpose() * &q;
        assert!((qtq - DMatrix::identity(3, 3)).norm() < 1e-14);
        let dv = DVector::from_vec(d);
        assert!((q.transpose() * dv).norm() < 1e-14);
    }

    #[test]
    fn flat_trivial_is_immediate() {
        let cfg = SpectralConfig::with_modes(8);
        let p = PhysicalParams::flat(cfg, 1.0, 1.0, 0.5).unwrap();
        let cur = p.current().unwrap();
        let r = continue_trivial(&p, &cur, &TrivialOptions::default()).unwrap();
        assert!(r.u.is_zero());
        assert_eq!(r.newton_iters, 0);
    }
}
