//! Real zero-mean periodic fields stored as truncated Fourier series.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

/// Truncation and grid parameters shared by every field of a computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Highest retained wavenumber `K`.
    pub n_modes: usize,
    /// Sobolev index for norms.
    pub s: f64,
    /// Ratio of physical grid points to `2K`.
    pub dealias_factor: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            n_modes: 64,
            s: 1.0,
            dealias_factor: 2.0,
        }
    }
}

impl SpectralConfig {
    pub fn new(n_modes: usize, s: f64, dealias_factor: f64) -> Result<Self> {
        let cfg = SpectralConfig {
            n_modes,
            s,
            dealias_factor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Shorthand for `K` modes with `s = 1` and dealias factor 2.
    pub fn with_modes(n_modes: usize) -> Self {
        SpectralConfig {
            n_modes,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_modes < 4 {
            return Err(Error::Validation(format!(
                "spectral.n_modes must be at least 4, got {}",
                self.n_modes
            )));
        }
        if !(self.s >= 0.0) {
            return Err(Error::Validation(format!(
                "spectral.s must be nonnegative, got {}",
                self.s
            )));
        }
        if !(self.dealias_factor >= 1.5) {
            return Err(Error::Validation(format!(
                "spectral.dealias_factor must be at least 1.5, got {}",
                self.dealias_factor
            )));
        }
        Ok(())
    }

    /// Number of physical grid points: `dealias_factor · 2K` rounded up to an even integer.
    pub fn grid_size(&self) -> usize {
        let n = (self.dealias_factor * (2 * self.n_modes) as f64).ceil() as usize;
        n + n % 2
    }

    /// Length of the real coefficient vector of one field.
    pub fn field_dof(&self) -> usize {
        2 * self.n_modes
    }

    pub fn grid(&self) -> Vec<f64> {
        fft::grid_points(self.grid_size())
    }
}

/// Zero-mean real 2π-periodic function `Σ_{0<|k|≤K} c_k e^{ikx}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicField {
    coeffs: Vec<Complex64>,
    config: SpectralConfig,
}

impl PeriodicField {
    pub fn zeros(config: SpectralConfig) -> Self {
        PeriodicField {
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * config.n_modes + 1],
            config,
        }
    }

    /// Builds a field from `(k, c_k)` pairs with `k ≥ 1`; negative modes follow by symmetry.
    pub fn from_modes(config: SpectralConfig, modes: &[(usize, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(config);
        for &(k, c) in modes {
            if k == 0 || k > config.n_modes {
                return Err(Error::Validation(format!(
                    "wavenumber {k} outside 1..={}",
                    config.n_modes
                )));
            }
            f.set_coeff(k, c);
        }
        Ok(f)
    }

    /// `amplitude · cos(kx)`.
    pub fn cosine(config: SpectralConfig, k: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(config);
        f.set_coeff(k, Complex64::new(0.5 * amplitude, 0.0));
        f
    }

    /// `amplitude · sin(kx)`.
    pub fn sine(config: SpectralConfig, k: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(config);
        f.set_coeff(k, Complex64::new(0.0, -0.5 * amplitude));
        f
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    pub fn n_modes(&self) -> usize {
        self.config.n_modes
    }

    /// Coefficient `c_k`; zero outside the retained band.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let kk = self.config.n_modes as i64;
        if k.abs() > kk {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + kk) as usize]
        }
    }

    /// Sets `c_k` for `1 ≤ k ≤ K` and `c_{-k}` to its conjugate.
    pub fn set_coeff(&mut self, k: usize, c: Complex64) {
        let kk = self.config.n_modes;
        assert!(k >= 1 && k <= kk, "mode {k} outside 1..={kk}");
        self.coeffs[kk + k] = c;
        self.coeffs[kk - k] = c.conj();
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Pointwise value `Σ c_k e^{ikx}`.
    pub fn synthesize(&self, x: f64) -> f64 {
        let mut sum = 0.0;
        for k in 1..=self.config.n_modes {
            let c = self.coeff(k as i64);
            let (s, co) = (k as f64 * x).sin_cos();
            sum += 2.0 * (c.re * co - c.im * s);
        }
        sum
    }

    /// Applies a Fourier multiplier with `m(-k) = conj(m(k))`.
    pub fn map_symbol(&self, m: impl Fn(i64) -> Complex64) -> Self {
        let mut out = self.clone();
        for k in 1..=self.config.n_modes {
            let c = self.coeff(k as i64) * m(k as i64);
            out.set_coeff(k, c);
        }
        out
    }

    pub fn derivative(&self) -> Self {
        self.map_symbol(|k| Complex64::new(0.0, k as f64))
    }

    /// `G(0;0)` for depth `h`: multiplies `c_k` by `|k| tanh(h|k|)`.
    pub fn flat_dn_apply(&self, h: f64) -> Self {
        self.map_symbol(|k| {
            let k = k.abs() as f64;
            Complex64::new(k * (h * k).tanh(), 0.0)
        })
    }

    /// Shift `f(x) ↦ f(x + phi)`.
    pub fn translate(&self, phi: f64) -> Self {
        self.map_symbol(|k| Complex64::from_polar(1.0, k as f64 * phi))
    }

    /// Samples on the uniform grid of `config.grid_size()` points.
    pub fn to_grid(&self) -> Vec<f64> {
        self.to_grid_n(self.config.grid_size())
    }

    /// Samples on a uniform grid of `n > 2K` points.
    pub fn to_grid_n(&self, n: usize) -> Vec<f64> {
        let kk = self.config.n_modes;
        assert!(n > 2 * kk, "grid of {n} points cannot hold {kk} modes");
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for k in 1..=kk {
            spec[k] = self.coeff(k as i64);
            spec[n - k] = self.coeff(-(k as i64));
        }
        fft::synthesize(&spec)
    }

    /// Projects grid samples onto the retained band.
    ///
    /// Returns the zero-mean field and the discarded mean.
    pub fn from_grid(config: SpectralConfig, values: &[f64]) -> (Self, f64) {
        let n = values.len();
        let spec = fft::analyze(values);
        let mut f = Self::zeros(config);
        let top = config.n_modes.min((n - 1) / 2);
        for k in 1..=top {
            f.set_coeff(k, spec[k]);
        }
        (f, spec[0].re)
    }

    /// Dealiased pointwise product; the mean of the product is returned separately.
    pub fn product(&self, other: &Self) -> (Self, f64) {
        let a = self.to_grid();
        let b = other.to_grid();
        let p: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::from_grid(self.config, &p)
    }

    /// `|f|_s = (Σ (1+k²)^s |c_k|²)^{1/2}` over `0 < |k| ≤ K`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let mut sum = 0.0;
        for k in 1..=self.config.n_modes {
            let w = (1.0 + (k * k) as f64).powf(s);
            sum += 2.0 * w * self.coeff(k as i64).norm_sqr();
        }
        sum.sqrt()
    }

    /// `∫ f g dx` over one period.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        for k in 1..=self.config.n_modes {
            let a = self.coeff(k as i64);
            let b = other.coeff(k as i64);
            sum += (a * b.conj()).re;
        }
        4.0 * PI * sum
    }

    /// Largest absolute value on the physical grid.
    pub fn max_abs(&self) -> f64 {
        self.to_grid().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= alpha);
        out
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (c, d) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *c += alpha * d;
        }
        out
    }

    /// Real coordinates `[a_1..a_K, b_1..b_K]` of `Σ a_k cos kx + b_k sin kx`.
    pub fn to_real_vec(&self) -> Vec<f64> {
        let kk = self.config.n_modes;
        let mut v = vec![0.0; 2 * kk];
        for k in 1..=kk {
            let c = self.coeff(k as i64);
            v[k - 1] = 2.0 * c.re;
            v[kk + k - 1] = -2.0 * c.im;
        }
        v
    }

    pub fn from_real_vec(config: SpectralConfig, v: &[f64]) -> Self {
        let kk = config.n_modes;
        assert_eq!(v.len(), 2 * kk);
        let mut f = Self::zeros(config);
        for k in 1..=kk {
            f.set_coeff(k, Complex64::new(0.5 * v[k - 1], -0.5 * v[kk + k - 1]));
        }
        f
    }

    /// Same function on a different truncation; modes above the new `K` are dropped.
    pub fn resample(&self, config: SpectralConfig) -> Self {
        let mut f = Self::zeros(config);
        for k in 1..=config.n_modes.min(self.config.n_modes) {
            f.set_coeff(k, self.coeff(k as i64));
        }
        f
    }

    /// Positive-mode coefficients as a `{k: [re, im]}` map.
    pub fn to_json_value(&self) -> serde_json::Value {
        let map: BTreeMap<String, [f64; 2]> = (1..=self.config.n_modes)
            .filter_map(|k| {
                let c = self.coeff(k as i64);
                (c.norm() != 0.0).then(|| (k.to_string(), [c.re, c.im]))
            })
            .collect();
        serde_json::to_value(map).expect("coefficient map serializes")
    }

    pub fn from_json_value(config: SpectralConfig, value: &serde_json::Value) -> Result<Self> {
        let map: BTreeMap<String, [f64; 2]> = serde_json::from_value(value.clone())?;
        let mut modes = Vec::with_capacity(map.len());
        for (key, [re, im]) in map {
            let k: i64 = key
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad wavenumber key {key:?}")))?;
            let c = Complex64::new(re, im);
            match k {
                0 if c.norm() == 0.0 => {}
                0 => return Err(Error::Validation("nonzero mean coefficient".into())),
                k if k > 0 => modes.push((k as usize, c)),
                k => modes.push(((-k) as usize, c.conj())),
            }
        }
        Self::from_modes(config, &modes)
    }
}

/// Trapezoid rule on a uniform periodic grid: `2π · mean`.
pub fn integrate(values: &[f64]) -> f64 {
    2.0 * PI * values.iter().sum::<f64>() / values.len() as f64
}

/// Surface elevation and surface potential `u = (η, ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub eta: PeriodicField,
    pub xi: PeriodicField,
}

impl State {
    pub fn new(eta: PeriodicField, xi: PeriodicField) -> Result<Self> {
        if eta.config != xi.config {
            return Err(Error::Validation(
                "eta and xi must share one spectral configuration".into(),
            ));
        }
        Ok(State { eta, xi })
    }

    pub fn zeros(config: SpectralConfig) -> Self {
        State {
            eta: PeriodicField::zeros(config),
            xi: PeriodicField::zeros(config),
        }
    }

    pub fn config(&self) -> &SpectralConfig {
        self.eta.config()
    }

    pub fn dof(&self) -> usize {
        4 * self.config().n_modes
    }

    pub fn is_zero(&self) -> bool {
        self.eta.is_zero() && self.xi.is_zero()
    }

    /// `[η real coords, ξ real coords]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.eta.to_real_vec();
        v.extend(self.xi.to_real_vec());
        v
    }

    pub fn from_vec(config: SpectralConfig, v: &[f64]) -> Self {
        let m = config.field_dof();
        assert_eq!(v.len(), 2 * m);
        State {
            eta: PeriodicField::from_real_vec(config, &v[..m]),
            xi: PeriodicField::from_real_vec(config, &v[m..]),
        }
    }

    pub fn translate(&self, phi: f64) -> Self {
        State {
            eta: self.eta.translate(phi),
            xi: self.xi.translate(phi),
        }
    }

    pub fn derivative(&self) -> Self {
        State {
            eta: self.eta.derivative(),
            xi: self.xi.derivative(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        State {
            eta: self.eta.scale(alpha),
            xi: self.xi.scale(alpha),
        }
    }

    pub fn axpy(&self, alpha: f64, other: &Self) -> Self {
        State {
            eta: self.eta.axpy(alpha, &other.eta),
            xi: self.xi.axpy(alpha, &other.xi),
        }
    }

    /// `∫ η₁η₂ + ξ₁ξ₂ dx`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.eta.inner(&other.eta) + self.xi.inner(&other.xi)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Norm on `X = H^{s+1} × H^{s+1}`.
    pub fn norm_x(&self) -> f64 {
        let s = self.config().s + 1.0;
        self.eta.sobolev_norm(s).hypot(self.xi.sobolev_norm(s))
    }

    /// Norm on `Y = H^s × H^s`.
    pub fn norm_y(&self) -> f64 {
        let s = self.config().s;
        self.eta.sobolev_norm(s).hypot(self.xi.sobolev_norm(s))
    }

    pub fn resample(&self, config: SpectralConfig) -> Self {
        State {
            eta: self.eta.resample(config),
            xi: self.xi.resample(config),
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "n_modes": self.config().n_modes,
            "eta": self.eta.to_json_value(),
            "xi": self.xi.to_json_value(),
        })
    }

    pub fn from_json_value(config: SpectralConfig, value: &serde_json::Value) -> Result<Self> {
        let field = |name: &str| {
            value
                .get(name)
                .ok_or_else(|| Error::Validation(format!("state JSON lacks {name:?}")))
                .and_then(|v| PeriodicField::from_json_value(config, v))
        };
        State::new(field("eta")?, field("xi")?)
    }
}
