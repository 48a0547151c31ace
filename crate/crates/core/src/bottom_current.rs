//! The bottom-adapted harmonic current `Φ_b`.
//!
//! `Φ_b` is harmonic in `C_b = {y > −h + b(x)}`, 2π-periodic in `x`, decays as
//! `y → ∞`, and makes `Φ_b + x` tangential to the bottom:
//! `N_b·∇Φ_b = −b'` with `N_b·∇ = −∂_y + b'∂_x`.
//!
//! The bottom trace `φ` solves a second-kind Nyström system built on the
//! 2π-periodic fundamental solution `(1/2π) ln|sin(z/2)|`. Away from the bottom
//! `Φ_b = Re Ω` for an analytic `Ω`, so every derivative comes from `Ω^{(r)}`.

use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft;
use crate::fourier::PeriodicField;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `(1/4π) ln(sin²(dx/2) + sinh²(dy/2))`, the free 2π-periodic kernel.
pub fn periodic_green(dx: f64, dy: f64) -> f64 {
    let s = (0.5 * dx).sin();
    let t = (0.5 * dy).sinh();
    (s * s + t * t).ln() / (4.0 * PI)
}

/// Neumann Green function of the half-space `y > −h`, built from one image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenKernel {
    pub h: f64,
}

impl GreenKernel {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Validation(format!("depth h must be positive, got {h}")));
        }
        Ok(GreenKernel { h })
    }

    pub fn eval(&self, dx: f64, y: f64, y_prime: f64) -> Result<f64> {
        green_kernel(dx, y, y_prime, self.h)
    }

    /// `∂G/∂y'`.
    pub fn d_y_prime(&self, dx: f64, y: f64, y_prime: f64) -> f64 {
        let s2 = (0.5 * dx).sin().powi(2);
        let a = 0.5 * (y - y_prime);
        let b = 0.5 * (y + y_prime + 2.0 * self.h);
        let t1 = -a.sinh() * a.cosh() / (s2 + a.sinh().powi(2));
        let t2 = b.sinh() * b.cosh() / (s2 + b.sinh().powi(2));
        (t1 + t2) / (4.0 * PI)
    }
}

/// Free kernel plus its reflection in `y = −h`.
pub fn green_kernel(dx: f64, y: f64, y_prime: f64, h: f64) -> Result<f64> {
    if !(y >= -h && y_prime >= -h) {
        return Err(Error::Validation(format!(
            "kernel points must lie in y >= -h = {}: y = {y}, y' = {y_prime}",
            -h
        )));
    }
    let wrapped = dx.rem_euclid(2.0 * PI);
    if (wrapped == 0.0 || wrapped == 2.0 * PI) && y == y_prime {
        return Err(Error::SingularPoint { dx, y });
    }
    Ok(periodic_green(dx, y - y_prime) + periodic_green(dx, y + y_prime + 2.0 * h))
}

/// `A[b](x, y) = ∫ G(x − x', y, −h + b(x')) b'(x') dx'` by the trapezoid rule on `n` nodes.
pub fn kernel_a(b: &PeriodicField, x: f64, y: f64, h: f64, quadrature_size: usize) -> Result<f64> {
    check_resolved(b, quadrature_size)?;
    let nodes = fft::grid_points(quadrature_size);
    let bg = b.to_grid_n(quadrature_size);
    let bp = b.derivative().to_grid_n(quadrature_size);
    let bottom = bg.iter().map(|bb| bb - h);
    let spacing = 2.0 * PI / quadrature_size as f64;
    let mut sum = 0.0;
    for ((xp, ybot), bpj) in nodes.iter().zip(bottom).zip(&bp) {
        let dist = (y - ybot).hypot(angular_distance(x, *xp));
        if dist < 2.0 * spacing && y - ybot < 2.0 * spacing {
            return Err(Error::NearBoundary {
                x,
                y,
                distance: dist,
            });
        }
        sum += green_kernel(x - xp, y, ybot, h)? * bpj;
    }
    Ok(sum * spacing)
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn check_resolved(b: &PeriodicField, quadrature_size: usize) -> Result<()> {
    let highest = (1..=b.n_modes())
        .rev()
        .find(|&k| b.coeff(k as i64).norm() > 0.0)
        .unwrap_or(0);
    if 4 * highest + 1 > quadrature_size {
        return Err(Error::Resolution(format!(
            "bottom mode {highest} is not resolved by {quadrature_size} quadrature nodes"
        )));
    }
    Ok(())
}

/// How the Nyström system is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceSolver {
    /// Neumann series, falling back to LU if it fails to contract.
    Auto,
    NeumannSeries,
    Dense,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceOptions {
    pub quadrature_size: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub solver: TraceSolver,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            quadrature_size: 512,
            tol: 1e-13,
            max_iters: 500,
            solver: TraceSolver::Auto,
        }
    }
}

/// Discrete bottom layer carrying the trace and the flux data.
#[derive(Clone, Debug)]
struct Layer {
    z: Vec<Complex64>,
    bp: Vec<f64>,
    phi: Vec<f64>,
    weight: f64,
    y_max: f64,
}

impl Layer {
    fn new(b: &PeriodicField, h: f64, n: usize, phi: Vec<f64>) -> Self {
        let x = fft::grid_points(n);
        let bg = b.to_grid_n(n);
        let bp = b.derivative().to_grid_n(n);
        let z: Vec<Complex64> = x
            .iter()
            .zip(&bg)
            .map(|(&xx, &bb)| Complex64::new(xx, -h + bb))
            .collect();
        let y_max = bg.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v)) - h;
        Layer {
            z,
            bp,
            phi,
            weight: 2.0 * PI / n as f64,
            y_max,
        }
    }

    fn spacing(&self) -> f64 {
        self.weight
    }

    /// `Ω^{(r)}(z)` for `r ≥ 1`, or `Re Ω(z)` in the real part for `r = 0`.
    fn omega(&self, z: Complex64, r: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((zj, &bpj), &phj) in self.z.iter().zip(&self.bp).zip(&self.phi) {
            let w = z - zj;
            let k = kernel_derivatives(w);
            if r == 0 {
                acc += phj * (I - bpj) * k[1] + bpj * ln_abs_sin_half(w) / (2.0 * PI);
            } else {
                acc += phj * (I - bpj) * k[r + 1] + bpj * k[r];
            }
        }
        acc * self.weight
    }
}

/// `ln|sin(w/2)|` without overflow for large `|Im w|`.
fn ln_abs_sin_half(w: Complex64) -> f64 {
    let w = if w.im < 0.0 { -w } else { w };
    let e = (I * w).exp();
    0.5 * w.im - LN_2 + (Complex64::new(1.0, 0.0) - e).norm().ln()
}

/// `cot(w/2)` without overflow for large `|Im w|`.
fn cot_half(w: Complex64) -> Complex64 {
    if w.im >= 0.0 {
        let e = (I * w).exp();
        I * (e + 1.0) / (e - 1.0)
    } else {
        let e = (-I * w).exp();
        -I * (e + 1.0) / (e - 1.0)
    }
}

/// `[·, F', F'', F''', F'''']` for `F(w) = (1/2π) log sin(w/2)`.
fn kernel_derivatives(w: Complex64) -> [Complex64; 5] {
    let q = cot_half(w);
    let q2 = q * q;
    let one = Complex64::new(1.0, 0.0);
    [
        Complex64::new(0.0, 0.0),
        q / (4.0 * PI),
        -(one + q2) / (8.0 * PI),
        q * (one + q2) / (8.0 * PI),
        -(one + q2) * (one + 3.0 * q2) / (16.0 * PI),
    ]
}

/// Coefficients of `Ω(z) = Ω₀ + L z + Σ_{n≥1} C_n e^{inz}`, valid above every bottom node.
#[derive(Clone, Debug)]
struct UpperExpansion {
    omega0: Complex64,
    lin: Complex64,
    c: Vec<Complex64>,
    y_max: f64,
}

impl UpperExpansion {
    fn new(layer: &Layer) -> Self {
        let n = layer.z.len();
        let w = layer.weight;
        let n_max = n / 2 - 1;
        let mut omega0 = Complex64::new(0.0, 0.0);
        let mut lin = Complex64::new(0.0, 0.0);
        let log_i_half = Complex64::new(-LN_2, 0.5 * PI);
        for ((zj, &bpj), &phj) in layer.z.iter().zip(&layer.bp).zip(&layer.phi) {
            omega0 += phj * (1.0 + I * bpj) / (4.0 * PI) + bpj * (0.5 * I * zj + log_i_half) / (2.0 * PI);
            lin += -0.5 * I * bpj / (2.0 * PI);
        }
        omega0 *= w;
        lin *= w;
        let mut c = vec![Complex64::new(0.0, 0.0); n_max + 1];
        let mut pw: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); n];
        let step: Vec<Complex64> = layer.z.iter().map(|zj| (-I * zj).exp()).collect();
        for k in 1..=n_max {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                pw[j] *= step[j];
                acc += pw[j] * (layer.phi[j] * (1.0 + I * layer.bp[j]) - layer.bp[j] / k as f64);
            }
            c[k] = acc * w / (2.0 * PI);
        }
        UpperExpansion {
            omega0,
            lin,
            c,
            y_max: layer.y_max,
        }
    }

    /// Number of terms needed at height `y`, or `None` when the series is too slow.
    fn terms_at(&self, y: f64) -> Option<usize> {
        let gap = y - self.y_max;
        let n_max = self.c.len() - 1;
        if gap <= 0.0 {
            return None;
        }
        let needed = (40.0 / gap).ceil() as usize;
        (needed <= n_max).then_some(needed)
    }
}

/// Φ_b and its derivatives along a curve `(x_i, y_i)`.
#[derive(Clone, Debug, Default)]
pub struct CurveValues {
    /// `values[(m, n)]` holds `∂_x^m ∂_y^n Φ_b` at every point, keyed by `m + 4n`.
    values: Vec<Option<Vec<f64>>>,
}

impl CurveValues {
    pub fn get(&self, dx_order: usize, dy_order: usize) -> &[f64] {
        self.values[dx_order + 4 * dy_order]
            .as_deref()
            .expect("derivative order was requested")
    }
}

/// Diagnostics of the trace solve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceReport {
    pub iterations: usize,
    pub residual: f64,
    pub used_dense_fallback: bool,
}

/// Evaluator for `Φ_b` anywhere in the fluid region `C_b`.
#[derive(Clone, Debug)]
pub struct HarmonicCurrent {
    pub b: PeriodicField,
    pub h: f64,
    pub quadrature_size: usize,
    pub report: TraceReport,
    layer: Layer,
    upper: UpperExpansion,
    trivial: bool,
}

impl HarmonicCurrent {
    /// Current of a flat bottom, `Φ_0 = 0`.
    pub fn flat(b_config: crate::fourier::SpectralConfig, h: f64) -> Self {
        let b = PeriodicField::zeros(b_config);
        let n = 512;
        let layer = Layer::new(&b, h, n, vec![0.0; n]);
        let upper = UpperExpansion {
            omega0: Complex64::new(0.0, 0.0),
            lin: Complex64::new(0.0, 0.0),
            c: vec![Complex64::new(0.0, 0.0); 2],
            y_max: -h,
        };
        HarmonicCurrent {
            b,
            h,
            quadrature_size: n,
            report: TraceReport {
                iterations: 0,
                residual: 0.0,
                used_dense_fallback: false,
            },
            layer,
            upper,
            trivial: true,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// Bottom trace `φ(x_j) = Φ_b(x_j, −h + b(x_j))` on the quadrature nodes.
    pub fn bottom_trace(&self) -> &[f64] {
        &self.layer.phi
    }

    /// Constant term of the upper expansion, `mean(φ)/2` up to rounding; zero for a decaying `Φ_b`.
    pub fn far_field_constant(&self) -> f64 {
        self.upper.omega0.re
    }

    /// `∂_x^m ∂_y^n Φ_b(x, y)` with `m + n ≤ 3`.
    pub fn evaluate(&self, x: f64, y: f64, dx_order: usize, dy_order: usize) -> Result<f64> {
        evaluate_phi(self, x, y, dx_order, dy_order)
    }

    /// Batched derivatives along a curve lying inside the fluid.
    ///
    /// `orders` lists `(m, n)` pairs with `m + n ≤ 3`.
    pub fn eval_curve(&self, x: &[f64], y: &[f64], orders: &[(usize, usize)]) -> Result<CurveValues> {
        let mut out = CurveValues {
            values: vec![None; 16],
        };
        for &(m, n) in orders {
            if m + n > 3 {
                return Err(Error::Validation(format!(
                    "derivative order ({m}, {n}) exceeds 3"
                )));
            }
            out.values[m + 4 * n] = Some(vec![0.0; x.len()]);
        }
        if self.trivial {
            return Ok(out);
        }
        let y_min = y.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        if let Some(terms) = self.upper.terms_at(y_min) {
            self.eval_curve_series(x, y, orders, terms, &mut out);
        } else {
            for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
                for &(m, n) in orders {
                    let v = evaluate_phi(self, xi, yi, m, n)?;
                    out.values[m + 4 * n].as_mut().unwrap()[i] = v;
                }
            }
        }
        Ok(out)
    }

    fn eval_curve_series(
        &self,
        x: &[f64],
        y: &[f64],
        orders: &[(usize, usize)],
        terms: usize,
        out: &mut CurveValues,
    ) {
        let up = &self.upper;
        for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
            let z = Complex64::new(xi, yi);
            let e = (I * z).exp();
            // Ω^{(r)}(z) for r = 0..=3.
            let mut om = [Complex64::new(0.0, 0.0); 4];
            om[0] = up.omega0 + up.lin * z;
            om[1] = up.lin;
            let mut p = Complex64::new(1.0, 0.0);
            for k in 1..=terms {
                p *= e;
                let t = up.c[k] * p;
                let ik = Complex64::new(0.0, k as f64);
                om[0] += t;
                om[1] += ik * t;
                om[2] += ik * ik * t;
                om[3] += ik * ik * ik * t;
            }
            for &(m, n) in orders {
                let v = (I.powu(n as u32) * om[m + n]).re;
                out.values[m + 4 * n].as_mut().unwrap()[i] = v;
            }
        }
    }

    /// Sup-norm of `N_b·∇(Φ_b + x)` on `n_check` bottom points.
    ///
    /// The flux is evaluated at six normal offsets on a refined quadrature and
    /// extrapolated to the bottom.
    pub fn bottom_neumann_residual(&self, n_check: usize) -> f64 {
        if self.trivial {
            return 0.0;
        }
        let fine = 8 * self.quadrature_size;
        let phi_fine = interpolate_periodic(&self.layer.phi, fine);
        let refined = Layer::new(&self.b, self.h, fine, phi_fine);
        let delta = 40.0 / fine as f64;
        let mut worst = 0.0_f64;
        for c in 0..n_check {
            let x0 = 2.0 * PI * c as f64 / n_check as f64;
            let y0 = -self.h + self.b.synthesize(x0);
            let bp = self.b.derivative().synthesize(x0);
            let norm = (1.0 + bp * bp).sqrt();
            let (nx, ny) = (-bp / norm, 1.0 / norm);
            let mut f = [0.0; 6];
            for (m, fm) in f.iter_mut().enumerate() {
                let s = delta * (m + 1) as f64;
                let z = Complex64::new(x0 + s * nx, y0 + s * ny);
                let d1 = refined.omega(z, 1);
                let (px, py) = (d1.re, (I * d1).re);
                *fm = -py + bp * (px + 1.0);
            }
            let extrap = 6.0 * f[0] - 15.0 * f[1] + 20.0 * f[2] - 15.0 * f[3] + 6.0 * f[4] - f[5];
            worst = worst.max(extrap.abs());
        }
        worst
    }
}

fn interpolate_periodic(values: &[f64], n: usize) -> Vec<f64> {
    let m = values.len();
    let spec = fft::analyze(values);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[0] = spec[0];
    for k in 1..m / 2 {
        out[k] = spec[k];
        out[n - k] = spec[m - k];
    }
    fft::synthesize(&out)
}

/// Solves for the bottom trace with the default quadrature (512 nodes).
pub fn solve_bottom_trace(b: &PeriodicField, h: f64, tol: f64) -> Result<HarmonicCurrent> {
    solve_bottom_trace_with(
        b,
        h,
        &TraceOptions {
            tol,
            ..Default::default()
        },
    )
}

/// Nyström matrices `(K, S)` of `(½I − K)φ = S` on `n` bottom nodes.
///
/// `K` discretizes the double layer on the bottom, `S` the single layer acting on `b'`.
pub fn trace_operators(b: &PeriodicField, h: f64, n: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if n % 2 != 0 {
        return Err(Error::Validation(format!("quadrature_size must be even, got {n}")));
    }
    check_resolved(b, n)?;
    let layer = Layer::new(b, h, n, vec![0.0; n]);
    let bpp = b.derivative().derivative().to_grid_n(n);
    let w = layer.weight;
    let x = fft::grid_points(n);
    // Kress weights for ∫ ln(4 sin²((t−τ)/2)) f(τ) dτ.
    let mut kress = vec![0.0; n];
    for (d, r) in kress.iter_mut().enumerate() {
        let delta = x[d];
        let mut s = 0.0;
        for m in 1..n / 2 {
            s += (m as f64 * delta).cos() / m as f64;
        }
        *r = -4.0 * PI / n as f64 * s - 4.0 * PI / (n * n) as f64 * (0.5 * n as f64 * delta).cos();
    }
    let mut kmat = DMatrix::zeros(n, n);
    let mut s = vec![0.0; n];
    for i in 0..n {
        let mut si = 0.0;
        for j in 0..n {
            let bpj = layer.bp[j];
            let smooth = if i == j {
                kmat[(i, j)] = w * bpp[i] / (4.0 * PI * (1.0 + bpj * bpj));
                (1.0 + bpj * bpj).ln()
            } else {
                let dz = layer.z[i] - layer.z[j];
                let k1 = cot_half(dz) / (4.0 * PI);
                kmat[(i, j)] = w * ((I - bpj) * k1).re;
                let dt = x[i] - x[j];
                2.0 * ln_abs_sin_half(dz) - 2.0 * (0.5 * dt).sin().abs().ln()
            };
            let wr = kress[(i + n - j) % n];
            si += bpj * (wr + w * (smooth - 2.0 * LN_2)) / (4.0 * PI);
        }
        s[i] = si;
    }
    Ok((kmat, s))
}

pub fn solve_bottom_trace_with(
    b: &PeriodicField,
    h: f64,
    opts: &TraceOptions,
) -> Result<HarmonicCurrent> {
    if !(h > 0.0) {
        return Err(Error::Validation(format!("depth h must be positive, got {h}")));
    }
    if b.max_abs() >= h {
        return Err(Error::Validation(format!(
            "bottom amplitude {} reaches the mean surface level (h = {h})",
            b.max_abs()
        )));
    }
    if b.is_zero() {
        return Ok(HarmonicCurrent::flat(*b.config(), h));
    }
    let n = opts.quadrature_size;
    let (kmat, s) = trace_operators(b, h, n)?;
    let residual_of = |phi: &[f64]| -> f64 {
        let kphi = &kmat * nalgebra::DVector::from_column_slice(phi);
        (0..n)
            .map(|i| (0.5 * phi[i] - kphi[i] - s[i]).abs())
            .fold(0.0, f64::max)
    };
    let scale = s.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let neumann = |max_iters: usize| -> std::result::Result<(Vec<f64>, usize), f64> {
        let k2 = &kmat * 2.0;
        let s2 = nalgebra::DVector::from_iterator(n, s.iter().map(|v| 2.0 * v));
        let mut phi = s2.clone();
        let mut last = f64::INFINITY;
        for it in 1..=max_iters {
            let next = &k2 * &phi + &s2;
            let step = (&next - &phi).amax();
            phi = next;
            if step <= opts.tol * scale {
                return Ok((phi.as_slice().to_vec(), it));
            }
            if it > 5 && step >= last {
                return Err(step);
            }
            last = step;
        }
        Err(last)
    };
    let dense = || -> Result<Vec<f64>> {
        let a = DMatrix::identity(n, n) * 0.5 - &kmat;
        let rhs = nalgebra::DVector::from_column_slice(&s);
        a.lu()
            .solve(&rhs)
            .map(|v| v.as_slice().to_vec())
            .ok_or(Error::Divergence {
                residual: f64::INFINITY,
                tol: opts.tol,
            })
    };
    let (phi, iterations, fallback) = match opts.solver {
        TraceSolver::Dense => (dense()?, 0, false),
        TraceSolver::NeumannSeries => match neumann(opts.max_iters) {
            Ok((phi, it)) => (phi, it, false),
            Err(step) => {
                return Err(Error::Divergence {
                    residual: step / scale,
                    tol: opts.tol,
                })
            }
        },
        TraceSolver::Auto => match neumann(opts.max_iters) {
            Ok((phi, it)) => (phi, it, false),
            Err(_) => (dense()?, 0, true),
        },
    };
    let residual = residual_of(&phi) / scale;
    if !(residual <= 1e3 * opts.tol.max(1e-15)) {
        return Err(Error::Divergence {
            residual,
            tol: opts.tol,
        });
    }
    let layer = Layer::new(b, h, n, phi);
    let upper = UpperExpansion::new(&layer);
    Ok(HarmonicCurrent {
        b: b.clone(),
        h,
        quadrature_size: n,
        report: TraceReport {
            iterations,
            residual,
            used_dense_fallback: fallback,
        },
        layer,
        upper,
        trivial: false,
    })
}

/// `∂_x^m ∂_y^n Φ_b(x, y)` from the boundary-integral representation.
pub fn evaluate_phi(
    current: &HarmonicCurrent,
    x: f64,
    y: f64,
    dx_order: usize,
    dy_order: usize,
) -> Result<f64> {
    let r = dx_order + dy_order;
    if r > 3 {
        return Err(Error::Validation(format!(
            "derivative order ({dx_order}, {dy_order}) exceeds 3"
        )));
    }
    if current.trivial {
        return Ok(0.0);
    }
    let layer = &current.layer;
    let gap = y - (-current.h + current.b.synthesize(x));
    if gap < 4.0 * layer.spacing() {
        return Err(Error::NearBoundary {
            x,
            y,
            distance: gap,
        });
    }
    let z = Complex64::new(x, y);
    if let Some(terms) = current.upper.terms_at(y) {
        let mut out = CurveValues {
            values: vec![None; 16],
        };
        out.values[dx_order + 4 * dy_order] = Some(vec![0.0]);
        current.eval_curve_series(&[x], &[y], &[(dx_order, dy_order)], terms, &mut out);
        return Ok(out.get(dx_order, dy_order)[0]);
    }
    let om = layer.omega(z, r);
    Ok((I.powu(dy_order as u32) * om).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::SpectralConfig;

    fn cfg() -> SpectralConfig {
        SpectralConfig::with_modes(8)
    }

    #[test]
    fn image_kernel_has_zero_flux_through_y_minus_h() {
        let g = GreenKernel::new(1.0).unwrap();
        for &(dx, y) in &[(0.3, 0.2), (2.0, -0.5), (3.1, 1.5)] {
            assert!(g.d_y_prime(dx, y, -1.0).abs() < 1e-15);
            let e = 1e-3;
            let f = |t: f64| g.eval(dx, y, -1.0 + t).unwrap();
            let fd = (-3.0 * f(0.0) + 4.0 * f(e) - f(2.0 * e)) / (2.0 * e);
            assert!(fd.abs() < 1e-8, "{fd}");
        }
    }

    #[test]
    fn kernel_singular_point() {
        assert!(matches!(
            green_kernel(0.0, 0.2, 0.2, 1.0),
            Err(Error::SingularPoint { .. })
        ));
        assert!(green_kernel(2.0 * PI, 0.2, 0.2, 1.0).is_err());
    }

    #[test]
    fn flat_bottom_is_trivial() {
        let c = solve_bottom_trace(&PeriodicField::zeros(cfg()), 1.0, 1e-12).unwrap();
        assert!(c.bottom_trace().iter().all(|&v| v == 0.0));
        for &(m, n) in &[(0, 0), (1, 0), (0, 1), (1, 2)] {
            assert_eq!(evaluate_phi(&c, 0.4, 0.1, m, n).unwrap(), 0.0);
        }
        let (k, s) = trace_operators(&PeriodicField::zeros(cfg()), 1.0, 64).unwrap();
        assert!(k.amax() < 1e-15);
        assert_eq!(s.iter().fold(0.0_f64, |a, v| a.max(v.abs())), 0.0);
    }

    #[test]
    fn leading_order_current_matches_linear_theory() {
        // b = a cos x gives Φ_b ≈ a sin x e^{−(y+h)}.
        let a = 1e-4;
        let b = PeriodicField::cosine(cfg(), 1, a);
        let c = solve_bottom_trace(&b, 1.0, 1e-13).unwrap();
        for &(x, y) in &[(0.7, 0.0), (2.0, -0.4), (4.0, 1.0)] {
            let v = c.evaluate(x, y, 0, 0).unwrap();
            let lin = a * x.sin() * (-(y + 1.0_f64)).exp();
            assert!((v - lin).abs() < 5.0 * a * a, "{v} vs {lin}");
        }
    }

    #[test]
    fn series_and_direct_sums_agree() {
        let b = PeriodicField::cosine(cfg(), 1, 0.05).axpy(1.0, &PeriodicField::sine(cfg(), 3, 0.02));
        let c = solve_bottom_trace(&b, 1.0, 1e-13).unwrap();
        for &(m, n) in &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 3), (1, 2)] {
            let x = 1.3;
            let y = 0.05;
            let series = c.evaluate(x, y, m, n).unwrap();
            let direct = (I.powu(n as u32) * c.layer.omega(Complex64::new(x, y), m + n)).re;
            assert!((series - direct).abs() < 1e-13, "({m},{n}): {series} vs {direct}");
        }
    }

    #[test]
    fn neumann_condition_holds() {
        let b = PeriodicField::cosine(cfg(), 2, 0.05);
        let c = solve_bottom_trace(&b, 1.0, 1e-13).unwrap();
        let r = c.bottom_neumann_residual(32);
        assert!(r < 1e-10, "{r:e}");
    }

    #[test]
    fn near_boundary_is_rejected() {
        let b = PeriodicField::cosine(cfg(), 1, 0.05);
        let c = solve_bottom_trace(&b, 1.0, 1e-12).unwrap();
        let y = -1.0 + 0.05 * 0.3_f64.cos() + 1e-3;
        assert!(matches!(
            evaluate_phi(&c, 0.3, y, 0, 0),
            Err(Error::NearBoundary { .. })
        ));
    }
}
