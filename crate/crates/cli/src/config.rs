//! Declarative run configuration read from a TOML file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steadywave::{PeriodicField, SpectralConfig};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    TrivialContinue,
    RegionMap,
    StokesBranch,
    Persist,
    Sweep,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::TrivialContinue => "trivial-continue",
            Stage::RegionMap => "region-map",
            Stage::StokesBranch => "stokes-branch",
            Stage::Persist => "persist",
            Stage::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub stage: Stage,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub physical: Physical,
    #[serde(default)]
    pub spectral: Spectral,
    /// Overrides of the named solver tolerances; see [`Tolerances`].
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub region: Option<RegionSection>,
    pub trivial: Option<TrivialSection>,
    pub stokes: Option<StokesSection>,
    pub persist: Option<PersistSection>,
    pub sweep: Option<SweepSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    pub g: f64,
    pub h: f64,
    pub c: Option<f64>,
    #[serde(default)]
    pub bottom: BottomSpec,
}

/// `b(x) = Σ cos_k cos kx + sin_k sin kx`, or samples on a uniform grid.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottomSpec {
    #[serde(default)]
    pub modes: Vec<BottomMode>,
    /// CSV with a `b` column sampled at `x_j = 2πj/n`.
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottomMode {
    pub k: usize,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Spectral {
    pub n_modes: usize,
    pub s: f64,
    pub dealias_factor: f64,
}

impl Default for Spectral {
    fn default() -> Self {
        let d = SpectralConfig::default();
        Spectral {
            n_modes: d.n_modes,
            s: d.s,
            dealias_factor: d.dealias_factor,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionSection {
    /// `|b|_{s+1}`; taken from the bottom when absent.
    pub b_norm: Option<f64>,
    pub c_star: f64,
    pub k_max: usize,
    pub gamma: Option<f64>,
    /// Fit `γ` from the Hessian of the configured bottom.
    pub calibrate: bool,
    /// Largest `|b|` drawn on the boundary curves.
    pub curve_b_max: Option<f64>,
    pub curve_points: usize,
}

impl Default for RegionSection {
    fn default() -> Self {
        RegionSection {
            b_norm: None,
            c_star: 2.0,
            k_max: 8,
            gamma: None,
            calibrate: false,
            curve_b_max: None,
            curve_points: 41,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrivialSection {
    /// Speeds to solve at; `physical.c` when empty.
    pub speeds: Vec<f64>,
    pub gamma: Option<f64>,
    /// Perturbed restarts per speed, drawn from `seed`.
    pub restarts: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StokesSection {
    pub k: usize,
    pub steps: usize,
    pub ds: f64,
    pub start_amplitude: f64,
    pub max_amplitude: Option<f64>,
}

impl Default for StokesSection {
    fn default() -> Self {
        StokesSection {
            k: 1,
            steps: 20,
            ds: 0.01,
            start_amplitude: 1e-3,
            max_amplitude: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PersistSection {
    /// Wavenumber of the flat-bottom orbit.
    pub k: usize,
    /// `|η|_∞` of the orbit.
    pub amplitude: f64,
    pub n_theta: usize,
    pub max_doublings: usize,
    pub ds: f64,
    pub steps: usize,
}

impl Default for PersistSection {
    fn default() -> Self {
        PersistSection {
            k: 1,
            amplitude: 0.02,
            n_theta: 64,
            max_doublings: 3,
            ds: 0.006,
            steps: 60,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Multipliers of the configured bottom.
    pub amplitudes: Vec<f64>,
    pub speeds: Vec<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_workers() -> usize {
    1
}

/// Named tolerances with their defaults.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Tolerances {
    pub newton: f64,
    pub branch: f64,
    pub normal: f64,
    pub refine: f64,
    pub flat: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton: 1e-10,
            branch: 1e-10,
            normal: 1e-11,
            refine: 1e-9,
            flat: 1e-10,
        }
    }
}

pub fn invalid(path: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: msg.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn spectral_config(&self) -> Result<SpectralConfig, CliError> {
        let s = self.spectral;
        SpectralConfig::new(s.n_modes, s.s, s.dealias_factor).map_err(|e| invalid("spectral", e.to_string()))
    }

    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        let mut t = Tolerances::default();
        for (key, &v) in &self.tolerances {
            let path = format!("tolerances.{key}");
            positive(&path, v)?;
            match key.as_str() {
                "newton" => t.newton = v,
                "branch" => t.branch = v,
                "normal" => t.normal = v,
                "refine" => t.refine = v,
                "flat" => t.flat = v,
                _ => return Err(invalid(&path, "unknown tolerance (expected newton, branch, normal, refine or flat)")),
            }
        }
        Ok(t)
    }

    /// The bottom on the configured spectral grid; CSV paths resolve against `base`.
    pub fn bottom(&self, base: &Path) -> Result<PeriodicField, CliError> {
        let cfg = self.spectral_config()?;
        let spec = &self.physical.bottom;
        if !spec.modes.is_empty() && spec.csv.is_some() {
            return Err(invalid("physical.bottom", "give either modes or csv, not both"));
        }
        if let Some(csv_path) = &spec.csv {
            let path = base.join(csv_path);
            let mut reader = csv::Reader::from_path(&path)
                .map_err(|e| invalid("physical.bottom.csv", format!("{}: {e}", path.display())))?;
            let headers = reader
                .headers()
                .map_err(|e| invalid("physical.bottom.csv", e.to_string()))?
                .clone();
            let col = headers
                .iter()
                .position(|h| h.trim() == "b")
                .ok_or_else(|| invalid("physical.bottom.csv", "missing column `b`"))?;
            let mut values = Vec::new();
            for (i, rec) in reader.records().enumerate() {
                let rec = rec.map_err(|e| invalid("physical.bottom.csv", e.to_string()))?;
                let v: f64 = rec
                    .get(col)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|_| invalid("physical.bottom.csv", format!("row {}: column `b` is not a number", i + 1)))?;
                values.push(v);
            }
            if values.len() <= 2 * cfg.n_modes {
                return Err(invalid(
                    "physical.bottom.csv",
                    format!("{} samples cannot resolve {} modes", values.len(), cfg.n_modes),
                ));
            }
            let (field, mean) = PeriodicField::from_grid(cfg, &values);
            let scale = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if mean.abs() > 1e-9 * scale.max(1.0) {
                return Err(invalid(
                    "physical.bottom.csv",
                    format!("samples have mean {mean:e}; fold the mean into physical.h"),
                ));
            }
            return Ok(field);
        }
        let mut b = PeriodicField::zeros(cfg);
        for (i, m) in spec.modes.iter().enumerate() {
            let path = format!("physical.bottom.modes[{i}].k");
            if m.k == 0 || m.k > cfg.n_modes {
                return Err(invalid(&path, format!("must lie in 1..={}, got {}", cfg.n_modes, m.k)));
            }
            if !(m.cos.is_finite() && m.sin.is_finite()) {
                return Err(invalid(&format!("physical.bottom.modes[{i}]"), "coefficients must be finite"));
            }
            b = b
                .axpy(1.0, &PeriodicField::cosine(cfg, m.k, m.cos))
                .axpy(1.0, &PeriodicField::sine(cfg, m.k, m.sin));
        }
        Ok(b)
    }

    /// Checks the fields every stage needs and those of the selected stage.
    pub fn validate(&self, bottom: &PeriodicField) -> Result<(), CliError> {
        let p = &self.physical;
        positive("physical.g", p.g)?;
        positive("physical.h", p.h)?;
        if let Some(c) = p.c {
            if !(c.is_finite() && c >= 0.0) {
                return Err(invalid("physical.c", format!("must be non-negative, got {c}")));
            }
        }
        let bmax = bottom.max_abs();
        // Sweep scales the bottom and checks each amplitude below.
        if self.stage != Stage::Sweep && !(bmax < p.h) {
            return Err(invalid(
                "physical.bottom",
                format!("|b|_inf = {bmax} must stay below h = {}", p.h),
            ));
        }
        self.tolerances()?;
        let cfg = self.spectral_config()?;
        match self.stage {
            Stage::RegionMap => {
                let r = self.region.clone().unwrap_or_default();
                if let Some(b) = r.b_norm {
                    if !(b.is_finite() && b >= 0.0) {
                        return Err(invalid("region.b_norm", format!("must be non-negative, got {b}")));
                    }
                }
                positive("region.c_star", r.c_star)?;
                if r.k_max == 0 {
                    return Err(invalid("region.k_max", "must be at least 1"));
                }
                if let Some(g) = r.gamma {
                    positive("region.gamma", g)?;
                }
                if r.calibrate && bottom.is_zero() {
                    return Err(invalid("region.calibrate", "needs a nonzero bottom to calibrate against"));
                }
                if r.curve_points < 2 {
                    return Err(invalid("region.curve_points", "must be at least 2"));
                }
            }
            Stage::TrivialContinue => {
                let t = self.trivial.clone().unwrap_or_default();
                if t.speeds.is_empty() && p.c.is_none() {
                    return Err(invalid("physical.c", "required by trivial-continue unless trivial.speeds is set"));
                }
                for (i, &c) in t.speeds.iter().enumerate() {
                    if !(c.is_finite() && c >= 0.0) {
                        return Err(invalid(&format!("trivial.speeds[{i}]"), format!("must be non-negative, got {c}")));
                    }
                }
                if let Some(g) = t.gamma {
                    positive("trivial.gamma", g)?;
                }
            }
            Stage::StokesBranch => {
                if !bottom.is_zero() {
                    return Err(invalid("physical.bottom", "stokes-branch requires a flat bottom"));
                }
                let s = self.stokes.clone().unwrap_or_default();
                if s.k == 0 || 4 * s.k > cfg.n_modes {
                    return Err(invalid("stokes.k", format!("must lie in 1..={}", cfg.n_modes / 4)));
                }
                positive("stokes.ds", s.ds)?;
                positive("stokes.start_amplitude", s.start_amplitude)?;
                if s.steps == 0 {
                    return Err(invalid("stokes.steps", "must be at least 1"));
                }
                if let Some(a) = s.max_amplitude {
                    positive("stokes.max_amplitude", a)?;
                }
            }
            Stage::Persist => {
                let s = self.persist.clone().unwrap_or_default();
                if s.k == 0 || 4 * s.k > cfg.n_modes {
                    return Err(invalid("persist.k", format!("must lie in 1..={}", cfg.n_modes / 4)));
                }
                positive("persist.amplitude", s.amplitude)?;
                positive("persist.ds", s.ds)?;
                if s.n_theta < 4 {
                    return Err(invalid("persist.n_theta", "must be at least 4"));
                }
            }
            Stage::Sweep => {
                let s = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| invalid("sweep", "section required by the sweep stage"))?;
                if bottom.is_zero() {
                    return Err(invalid("physical.bottom", "sweep scales the bottom and needs it nonzero"));
                }
                if s.amplitudes.is_empty() {
                    return Err(invalid("sweep.amplitudes", "must not be empty"));
                }
                if s.speeds.is_empty() {
                    return Err(invalid("sweep.speeds", "must not be empty"));
                }
                for (i, &a) in s.amplitudes.iter().enumerate() {
                    if !(a.is_finite() && a >= 0.0 && a * bmax < p.h) {
                        return Err(invalid(
                            &format!("sweep.amplitudes[{i}]"),
                            format!("must be non-negative with a·|b|_inf < h, got {a}"),
                        ));
                    }
                }
                for (i, &c) in s.speeds.iter().enumerate() {
                    if !(c.is_finite() && c >= 0.0) {
                        return Err(invalid(&format!("sweep.speeds[{i}]"), format!("must be non-negative, got {c}")));
                    }
                }
                if s.workers == 0 {
                    return Err(invalid("sweep.workers", "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}
