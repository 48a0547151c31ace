//! Steady waves that persist when a small bottom is switched on under a
//! non-degenerate flat-bottom orbit.
//!
//! Near the orbit `{u_c(· + θ)}` states are written `υ(θ, w) = τ_θ(u_c + w)`
//! with `⟨w, ∂_x u_c⟩ = 0`, where `τ_θ f = f(· + θ)`. For each `θ` the normal
//! equation `P_W ∇H(υ(θ, w)) = 0` fixes `w(θ)`, and the critical points of the
//! reduced Hamiltonian `h_b(θ) = H(υ(θ, w(θ)))` are critical points of `H`.
//!
//! Normal solves use the bordered system
//!
//! ```text
//! τ_θ⁻¹ ∇H(υ(θ, w)) − μ t = 0,   ⟨w, t⟩ = 0,
//! ```
//!
//! whose Jacobian in `(w, μ)` at the orbit does not depend on `θ`, so one
//! factorization serves the whole circle.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bottom_current::HarmonicCurrent;
use crate::error::{Error, Result};
use crate::fourier::{PeriodicField, State};
use crate::hamiltonian::{gradient_state, hamiltonian_value, hessian_dense_fd, PhysicalParams};
use crate::linalg;

/// Slice coordinates about the orbit of `u_c`.
#[derive(Clone, Debug)]
pub struct SliceChart {
    pub u_c: State,
    /// `∂_x u_c / |∂_x u_c|` in `L²`.
    pub tangent: State,
    pub minimal_period_p: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Greatest common divisor of the wavenumbers carrying amplitude above `1e-12`.
///
/// Returns 0 for the zero field.
pub fn fourier_support_gcd(fields: &[&PeriodicField]) -> usize {
    let mut p = 0;
    for f in fields {
        for k in 1..=f.n_modes() {
            if f.coeff(k as i64).norm() > 1e-12 {
                p = gcd(p, k);
            }
        }
    }
    p
}

impl SliceChart {
    pub fn new(u_c: State) -> Result<Self> {
        let d = u_c.derivative();
        let norm = d.l2_norm();
        if !(norm > 0.0) {
            return Err(Error::Validation(
                "orbit base point must not be translation invariant".into(),
            ));
        }
        let p = fourier_support_gcd(&[&u_c.eta, &u_c.xi]).max(1);
        Ok(SliceChart {
            tangent: d.scale(1.0 / norm),
            minimal_period_p: p,
            u_c,
        })
    }

    /// `τ_θ t`, the tangent at `υ(θ, 0)`.
    pub fn tangent_at(&self, theta: f64) -> State {
        self.tangent.translate(theta)
    }

    /// Period of `θ ↦ h_b(θ)`: `2π/p` with `p` shared by `u_c` and the bottom.
    pub fn sampling_period(&self, b: &PeriodicField) -> f64 {
        let p = if b.is_zero() {
            self.minimal_period_p
        } else {
            gcd(self.minimal_period_p, fourier_support_gcd(&[b]).max(1))
        };
        2.0 * std::f64::consts::PI / p as f64
    }
}

/// `υ(θ, w) = Σ e^{ikθ}(û_{c,k} + ŵ_k) e^{ikx}`.
pub fn slice_embed(chart: &SliceChart, theta: f64, w: &State) -> State {
    chart.u_c.axpy(1.0, w).translate(theta)
}

/// Normal solution at one phase.
#[derive(Clone, Debug)]
pub struct ReducedSample {
    pub theta: f64,
    pub h_value: f64,
    pub w: State,
    pub newton_iters: usize,
    /// `|P_W ∇H|_Y` at the solution.
    pub residual: f64,
    /// Multiplier with `∇H = μ t_θ` in real coordinates.
    pub mu: f64,
    /// `h_b'(θ) = ⟨∇H, ∂_θ υ⟩`.
    pub derivative: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PersistenceOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Step of the finite-difference Jacobian at `u_c`.
    pub fd_eps: f64,
    /// Largest allowed `|⟨w, t⟩|`.
    pub orthogonality_tol: f64,
}

impl Default for PersistenceOptions {
    fn default() -> Self {
        PersistenceOptions {
            tol: 1e-11,
            max_iters: 40,
            fd_eps: 1e-6,
            orthogonality_tol: 1e-10,
        }
    }
}

type Lu = nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Factorized bordered Jacobian `[[J, −t], [tᵀ, 0]]` at the orbit.
///
/// When the chord iteration contracts slowly the Jacobian is recomputed at the
/// current point; the latest refresh is kept for the following solves.
pub struct NormalSolver {
    lu: Lu,
    refreshed: RefCell<Option<Lu>>,
    t_vec: Vec<f64>,
    fd_eps: f64,
}

impl NormalSolver {
    /// Factorizes with the Jacobian of `∇H(·; b, c)` at `u_c`.
    pub fn new(chart: &SliceChart, jacobian: &DMatrix<f64>) -> Self {
        let t_vec = chart.tangent.to_vec();
        NormalSolver {
            lu: bordered(jacobian, &t_vec),
            refreshed: RefCell::new(None),
            t_vec,
            fd_eps: 1e-6,
        }
    }

    /// Drops any refreshed Jacobian and returns to the one at the orbit.
    pub fn reset(&self) {
        self.refreshed.replace(None);
    }

    fn solve(&self, rhs: Vec<f64>) -> Option<DVector<f64>> {
        let rhs = DVector::from_vec(rhs);
        match &*self.refreshed.borrow() {
            Some(lu) => lu.solve(&rhs),
            None => self.lu.solve(&rhs),
        }
    }

    /// Jacobian of `w ↦ τ_θ⁻¹ ∇H(τ_θ(u_c + w))`, conjugated from the one at
    /// the rotated state.
    fn refresh(&self, u: &State, theta: f64, params: &PhysicalParams, current: &HarmonicCurrent) -> Result<()> {
        let cfg = *u.config();
        let j = hessian_dense_fd(u, params, current, self.fd_eps)?;
        let n = self.t_vec.len();
        let rotation = |phi: f64| {
            let mut r = DMatrix::zeros(n, n);
            for col in 0..n {
                let mut e = vec![0.0; n];
                e[col] = 1.0;
                let v = State::from_vec(cfg, &e).translate(phi).to_vec();
                r.set_column(col, &DVector::from_vec(v));
            }
            r
        };
        let jw = rotation(-theta) * j * rotation(theta);
        self.refreshed.replace(Some(bordered(&jw, &self.t_vec)));
        Ok(())
    }

    /// Jacobian by finite differences of the gradient at `u_c`.
    pub fn at_orbit(
        chart: &SliceChart,
        params: &PhysicalParams,
        current: &HarmonicCurrent,
        fd_eps: f64,
    ) -> Result<Self> {
        let j = hessian_dense_fd(&chart.u_c, params, current, fd_eps)?;
        Ok(NormalSolver {
            fd_eps,
            ..Self::new(chart, &j)
        })
    }
}

fn bordered(jacobian: &DMatrix<f64>, t: &[f64]) -> Lu {
    let n = t.len();
    let mut big = DMatrix::zeros(n + 1, n + 1);
    big.view_mut((0, 0), (n, n)).copy_from(jacobian);
    for i in 0..n {
        big[(i, n)] = -t[i];
        big[(n, i)] = t[i];
    }
    big.lu()
}

/// Slowest accepted contraction of the chord iteration before a refresh.
const CHORD_RATE: f64 = 0.5;
const MAX_REFRESHES: usize = 3;

/// Solves `P_W ∇H(υ(θ, w); b, c) = 0` for `w ⊥ t`, starting at `w_init`.
pub fn solve_normal(
    chart: &SliceChart,
    solver: &NormalSolver,
    theta: f64,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    w_init: &State,
    opts: &PersistenceOptions,
) -> Result<ReducedSample> {
    let cfg = *chart.u_c.config();
    let n = solver.t_vec.len();
    let t = &solver.t_vec;
    // Start on the slice.
    let mut w = w_init.to_vec();
    let tw = linalg::dot(&w, t) / linalg::dot(t, t);
    w.iter_mut().zip(t).for_each(|(a, b)| *a -= tw * b);
    let mut residual = f64::INFINITY;
    let mut last = f64::INFINITY;
    let mut refreshes = 0;
    for it in 0..=opts.max_iters {
        let ws = State::from_vec(cfg, &w);
        let u = slice_embed(chart, theta, &ws);
        // Pull the gradient back to the unrotated frame.
        let g = gradient_state(&u, params, current)?.translate(-theta);
        let gv = g.to_vec();
        let mu = linalg::dot(&gv, t) / linalg::dot(t, t);
        let proj = State::from_vec(cfg, &gv.iter().zip(t).map(|(a, b)| a - mu * b).collect::<Vec<_>>());
        residual = proj.norm_y();
        if residual < opts.tol {
            let ortho = linalg::dot(&w, t).abs();
            if ortho > opts.orthogonality_tol {
                return Err(Error::Convergence {
                    what: "normal solve (orthogonality drift)",
                    iterations: it,
                    residual: ortho,
                    tol: opts.orthogonality_tol,
                });
            }
            let h_value = hamiltonian_value(&u, params, current)?;
            let dx = chart.u_c.axpy(1.0, &ws).derivative().to_vec();
            let derivative = std::f64::consts::PI * mu * linalg::dot(t, &dx);
            return Ok(ReducedSample {
                theta,
                h_value,
                w: ws,
                newton_iters: it,
                residual,
                mu,
                derivative,
            });
        }
        if !residual.is_finite() || it == opts.max_iters {
            break;
        }
        if residual > CHORD_RATE * last {
            if refreshes == MAX_REFRESHES {
                break;
            }
            solver.refresh(&u, theta, params, current)?;
            refreshes += 1;
        }
        last = residual;
        let mut rhs = vec![0.0; n + 1];
        for i in 0..n {
            rhs[i] = -(gv[i] - mu * t[i]);
        }
        rhs[n] = -linalg::dot(&w, t);
        let step = solver
            .solve(rhs)
            .ok_or(Error::Convergence {
                what: "normal solve (singular bordered matrix)",
                iterations: it,
                residual,
                tol: opts.tol,
            })?;
        for i in 0..n {
            w[i] += step[i];
        }
    }
    Err(Error::Convergence {
        what: "normal solve",
        iterations: opts.max_iters,
        residual,
        tol: opts.tol,
    })
}

/// `h_b` on `n_theta` uniform phases of one period, warm-started sequentially.
pub fn reduced_hamiltonian(
    chart: &SliceChart,
    solver: &NormalSolver,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    n_theta: usize,
    opts: &PersistenceOptions,
) -> Result<Vec<ReducedSample>> {
    let period = chart.sampling_period(&params.b);
    let mut out: Vec<ReducedSample> = Vec::with_capacity(n_theta);
    let mut warm = State::zeros(*chart.u_c.config());
    for i in 0..n_theta {
        let theta = period * i as f64 / n_theta as f64;
        let s = solve_normal(chart, solver, theta, params, current, &warm, opts)?;
        warm = s.w.clone();
        out.push(s);
    }
    Ok(out)
}

/// Number of sign changes of `h_b'` around the sampled period.
pub fn count_extrema(samples: &[ReducedSample]) -> usize {
    let n = samples.len();
    (0..n)
        .filter(|&i| {
            let a = samples[i].derivative;
            let b = samples[(i + 1) % n].derivative;
            (a > 0.0) != (b > 0.0)
        })
        .count()
}

/// Starts from `n_theta` samples and doubles until the extremum count repeats.
pub fn reduced_hamiltonian_adaptive(
    chart: &SliceChart,
    solver: &NormalSolver,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    n_theta: usize,
    max_doublings: usize,
    opts: &PersistenceOptions,
) -> Result<Vec<ReducedSample>> {
    let period = chart.sampling_period(&params.b);
    let mut samples = reduced_hamiltonian(chart, solver, params, current, n_theta, opts)?;
    let mut count = count_extrema(&samples);
    for _ in 0..max_doublings {
        let n = samples.len();
        let mut refined = Vec::with_capacity(2 * n);
        for i in 0..n {
            let theta = period * (2 * i + 1) as f64 / (2 * n) as f64;
            let mid = solve_normal(chart, solver, theta, params, current, &samples[i].w, opts)?;
            refined.push(samples[i].clone());
            refined.push(mid);
        }
        samples = refined;
        let c = count_extrema(&samples);
        if c == count {
            break;
        }
        count = c;
    }
    Ok(samples)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
    /// Curvature below the sampling noise; not classified.
    Flat,
}

/// A critical point of `H` obtained from a critical point of `h_b`.
#[derive(Clone, Debug)]
pub struct PersistentWave {
    pub u: State,
    pub phase: f64,
    pub kind: ExtremumKind,
    pub h_value: f64,
    /// `|∇H(u;b,c)|_Y`, tangential component included.
    pub residual: f64,
    /// `|w(θ_j)|_X`.
    pub w_norm: f64,
}

/// `max h_b − min h_b`.
pub fn oscillation(samples: &[ReducedSample]) -> f64 {
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.h_value), hi.max(s.h_value))
    });
    hi - lo
}

/// Refines every sign change of `h_b'` by Brent's method on `θ` and returns
/// the critical states over one sampling period.
///
/// Errors with [`Error::FewerThanTwoExtrema`] when `h_b` is flat to
/// `flat_tol · (1 + |h_b|)` or fewer than two sign changes are found.
#[allow(clippy::too_many_arguments)]
pub fn find_persistent_waves(
    samples: &[ReducedSample],
    chart: &SliceChart,
    solver: &NormalSolver,
    params: &PhysicalParams,
    current: &HarmonicCurrent,
    refine_tol: f64,
    flat_tol: f64,
    opts: &PersistenceOptions,
) -> Result<Vec<PersistentWave>> {
    let osc = oscillation(samples);
    let scale = 1.0 + samples.iter().fold(0.0_f64, |a, s| a.max(s.h_value.abs()));
    if !(osc > flat_tol * scale) {
        return Err(Error::FewerThanTwoExtrema { oscillation: osc });
    }
    let n = samples.len();
    let period = chart.sampling_period(&params.b);
    let mut waves = Vec::new();
    for i in 0..n {
        let a = &samples[i];
        let b = &samples[(i + 1) % n];
        if (a.derivative > 0.0) == (b.derivative > 0.0) {
            continue;
        }
        let kind = if a.derivative > 0.0 {
            ExtremumKind::Max
        } else {
            ExtremumKind::Min
        };
        let t0 = a.theta;
        let t1 = if i + 1 == n { period } else { b.theta };
        let mut warm = a.w.clone();
        // `μ` is only resolved to the normal-solve tolerance, so a critical
        // point that falls on a sample may show the same sign at both ends.
        let mut f = |theta: f64| -> Result<f64> {
            let s = solve_normal(chart, solver, theta, params, current, &warm, opts)?;
            warm = s.w.clone();
            Ok(if s.mu.abs() <= opts.tol { 0.0 } else { s.mu })
        };
        let theta = linalg::brent_root(&mut f, t0, t1, 1e-15, 200)?;
        let s = solve_normal(chart, solver, theta, params, current, &a.w, opts)?;
        let u = slice_embed(chart, theta, &s.w);
        let residual = gradient_state(&u, params, current)?.norm_y();
        // Second difference of the bracketing samples against the noise in h.
        let curvature = (b.derivative - a.derivative).abs();
        let noise = 1e3 * f64::EPSILON * scale;
        let kind = if curvature < noise { ExtremumKind::Flat } else { kind };
        if residual >= refine_tol {
            return Err(Error::Convergence {
                what: "persistent wave refinement",
                iterations: 1,
                residual,
                tol: refine_tol,
            });
        }
        waves.push(PersistentWave {
            phase: theta.rem_euclid(period),
            h_value: s.h_value,
            w_norm: s.w.norm_x(),
            kind,
            residual,
            u,
        });
    }
    if waves.len() < 2 {
        return Err(Error::FewerThanTwoExtrema { oscillation: osc });
    }
    Ok(waves)
}

/// Copies of each wave under the shifts `2πj/p` that cover the full circle.
pub fn extend_to_circle(waves: &[PersistentWave], period: f64) -> Vec<PersistentWave> {
    let copies = (2.0 * std::f64::consts::PI / period).round() as usize;
    let mut out = Vec::with_capacity(waves.len() * copies);
    for j in 0..copies {
        for w in waves {
            let shift = period * j as f64;
            let mut c = w.clone();
            c.phase = w.phase + shift;
            c.u = w.u.translate(shift);
            out.push(c);
        }
    }
    out.sort_by(|a, b| a.phase.total_cmp(&b.phase));
    out
}

/// Phase offset in `[0, 2π)` between the fundamental harmonics of `η` and `b`.
pub fn phase_offset(eta: &PeriodicField, b: &PeriodicField) -> Option<f64> {
    let k = (1..=b.n_modes()).find(|&k| b.coeff(k as i64).norm() > 1e-14)?;
    let ce = eta.coeff(k as i64);
    if ce.norm() == 0.0 {
        return None;
    }
    let d = (ce.arg() - b.coeff(k as i64).arg()) / k as f64;
    Some(d.rem_euclid(2.0 * std::f64::consts::PI / k as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::SpectralConfig;

    fn wave() -> State {
        let cfg = SpectralConfig::with_modes(8);
        State {
            eta: PeriodicField::cosine(cfg, 2, 0.1).axpy(1.0, &PeriodicField::cosine(cfg, 4, 0.01)),
            xi: PeriodicField::sine(cfg, 2, 0.05),
        }
    }

    #[test]
    fn embed_examples() {
        let chart = SliceChart::new(wave()).unwrap();
        assert_eq!(chart.minimal_period_p, 2);
        let z = State::zeros(*chart.u_c.config());
        assert_eq!(slice_embed(&chart, 0.0, &z), chart.u_c);
        let shifted = slice_embed(&chart, std::f64::consts::PI, &z);
        assert!(shifted.axpy(-1.0, &chart.u_c.translate(std::f64::consts::PI)).l2_norm() < 1e-15);
        let w = State {
            eta: PeriodicField::cosine(*chart.u_c.config(), 1, 0.02),
            xi: PeriodicField::zeros(*chart.u_c.config()),
        };
        let a = slice_embed(&chart, 0.7 + 0.4, &w);
        let b = slice_embed(&chart, 0.7, &w).translate(0.4);
        assert!(a.axpy(-1.0, &b).l2_norm() < 1e-14);
        assert!((chart.tangent.l2_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn support_gcd() {
        let cfg = SpectralConfig::with_modes(12);
        let f = PeriodicField::cosine(cfg, 6, 1.0).axpy(1.0, &PeriodicField::sine(cfg, 9, 0.5));
        assert_eq!(fourier_support_gcd(&[&f]), 3);
        assert_eq!(fourier_support_gcd(&[&PeriodicField::zeros(cfg)]), 0);
    }

    #[test]
    fn phase_offset_of_shifted_cosine() {
        let cfg = SpectralConfig::with_modes(4);
        let b = PeriodicField::cosine(cfg, 1, 1e-3);
        let eta = PeriodicField::cosine(cfg, 1, 0.02).translate(0.3);
        assert!((phase_offset(&eta, &b).unwrap() - 0.3).abs() < 1e-14);
    }
}
