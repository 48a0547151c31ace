//! One function per stage; each writes its files through [`Outputs`].

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use steadywave::continuation::{
    admissible_region, calibrate_gamma, continue_trivial, continue_trivial_from, stokes_branch, stokes_wave, StokesOptions,
    TrivialOptions,
};
use steadywave::hamiltonian::{
    critical_speed, dn_difference_matrix, hamiltonian_value, hessian_at_zero_with, PhysicalParams,
};
use steadywave::persistence::{
    extend_to_circle, find_persistent_waves, oscillation, phase_offset, reduced_hamiltonian_adaptive,
    NormalSolver, PersistenceOptions, SliceChart,
};
use steadywave::{PeriodicField, SpectralConfig, State};

use crate::config::{invalid, RunConfig, Stage};
use crate::output::{Cell, Outputs};
use crate::CliError;

pub fn run(config: &RunConfig, base: &Path, out: &mut Outputs) -> Result<(), CliError> {
    let bottom = config.bottom(base)?;
    config.validate(&bottom)?;
    match config.stage {
        Stage::RegionMap => region_map(config, &bottom, out),
        Stage::TrivialContinue => trivial_continue(config, &bottom, out),
        Stage::StokesBranch => stokes(config, out),
        Stage::Persist => persist(config, &bottom, out),
        Stage::Sweep => sweep(config, &bottom, out),
    }
}

fn params(config: &RunConfig, bottom: &PeriodicField, c: f64) -> Result<PhysicalParams, CliError> {
    Ok(PhysicalParams::new(config.physical.g, config.physical.h, c, bottom.clone())?)
}

fn region_map(config: &RunConfig, bottom: &PeriodicField, out: &mut Outputs) -> Result<(), CliError> {
    let r = config.region.clone().unwrap_or_default();
    let cfg = *bottom.config();
    let (g, h) = (config.physical.g, config.physical.h);
    let b_norm = r.b_norm.unwrap_or_else(|| bottom.sobolev_norm(cfg.s + 1.0));
    let gamma = if r.calibrate {
        let template = params(config, bottom, 0.0)?;
        calibrate_gamma(&template, bottom, &[0.5, 1.0], 40)?
    } else {
        r.gamma.unwrap_or(1.0)
    };
    let intervals: Vec<_> = admissible_region(b_norm, g, h, r.c_star, r.k_max, gamma)
        .into_iter()
        .filter(|iv| iv.half_width > 0.0)
        .collect();
    let rows = intervals
        .iter()
        .map(|iv| {
            vec![
                iv.k.into(),
                iv.c_k.into(),
                iv.half_width.into(),
                iv.lower.into(),
                iv.upper.into(),
            ]
        })
        .collect();
    out.csv("region.csv", &["k", "c_k", "half_width", "lower", "upper"], rows)?;
    // Boundaries |b| = γ k³ (c − c_k)² of the excluded parabolas.
    let b_max = r.curve_b_max.unwrap_or(if b_norm > 0.0 { 2.0 * b_norm } else { 1e-3 });
    let mut curves = Vec::new();
    for k in 1..=r.k_max {
        let c_k = critical_speed(k, g, h);
        if c_k > r.c_star {
            continue;
        }
        let reach = (b_max / (gamma * (k as f64).powi(3))).sqrt();
        for i in 0..r.curve_points {
            let c = c_k - reach + 2.0 * reach * i as f64 / (r.curve_points - 1) as f64;
            let b = gamma * (k as f64).powi(3) * (c - c_k).powi(2);
            curves.push(vec![k.into(), c.into(), b.into()]);
        }
    }
    out.csv("region_curves.csv", &["k", "c", "b_norm"], curves)?;
    out.residual("b_norm", b_norm);
    out.residual("gamma", gamma);
    out.residual("excluded_intervals", intervals.len());
    Ok(())
}

fn surface_rows(label: Cell, x: &[f64], b: &[f64], u: &State) -> Vec<Vec<Cell>> {
    let eta = u.eta.to_grid();
    let xi = u.xi.to_grid();
    (0..x.len())
        .map(|j| {
            vec![label.clone(), x[j].into(), b[j].into(), eta[j].into(), xi[j].into()]
        })
        .collect()
}

fn trivial_continue(config: &RunConfig, bottom: &PeriodicField, out: &mut Outputs) -> Result<(), CliError> {
    let t = config.trivial.clone().unwrap_or_default();
    let tol = config.tolerances()?;
    let cfg = *bottom.config();
    let speeds = if t.speeds.is_empty() {
        vec![config.physical.c.expect("validated")]
    } else {
        t.speeds.clone()
    };
    let opts = TrivialOptions {
        tol: tol.newton,
        gamma: t.gamma.unwrap_or(1.0),
        ..Default::default()
    };
    let base = params(config, bottom, speeds[0])?;
    let current = base.current()?;
    let dn = if bottom.is_zero() {
        zero_dn(cfg)
    } else {
        dn_difference_matrix(&cfg, bottom, base.h)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x = cfg.grid();
    let bg = bottom.to_grid();
    let mut rows = Vec::new();
    let mut surfaces = Vec::new();
    let mut worst_res = 0.0_f64;
    let mut restart_spread = 0.0_f64;
    let mut result = Ok(());
    for &c in &speeds {
        let p = base.with_speed(c);
        let step = (|| -> Result<_, CliError> {
            if bottom.is_zero() {
                return Ok((continue_trivial(&p, &current, &opts)?, None));
            }
            let hz = hessian_at_zero_with(&p, &current, &dn)?;
            let r = continue_trivial_from(&p, &current, &hz, &State::zeros(cfg), &opts)?;
            Ok((r, Some(hz)))
        })();
        let (r, hz) = match step {
            Ok(v) => v,
            Err(e) => {
                result = Err(e);
                break;
            }
        };
        if let Some(hz) = &hz {
            for _ in 0..t.restarts {
                let size = 0.2 * r.u.eta.max_abs().max(r.u.xi.max_abs());
                let kick = random_state(&mut rng, cfg, size);
                let r2 = continue_trivial_from(&p, &current, hz, &r.u.axpy(1.0, &kick), &opts)?;
                let d = r2.u.axpy(-1.0, &r.u);
                restart_spread = restart_spread.max(d.eta.max_abs().max(d.xi.max_abs()));
            }
        }
        worst_res = worst_res.max(r.residual_norm);
        let energy = hamiltonian_value(&r.u, &p, &current)?;
        rows.push(vec![
            c.into(),
            r.residual_norm.into(),
            r.u.eta.max_abs().into(),
            r.u.xi.max_abs().into(),
            r.u.eta.sobolev_norm(cfg.s).into(),
            r.newton_iters.into(),
            r.fixed_point_iters.into(),
            r.smallest_hessian_sv.into(),
            energy.into(),
        ]);
        surfaces.extend(surface_rows(Cell::F(c), &x, &bg, &r.u));
    }
    out.csv(
        "trivial_branch.csv",
        &[
            "c",
            "residual",
            "eta_inf",
            "xi_inf",
            "eta_hs",
            "newton_iters",
            "fixed_point_iters",
            "sigma_min",
            "hamiltonian",
        ],
        rows,
    )?;
    out.csv("surface.csv", &["c", "x", "b", "eta", "xi"], surfaces)?;
    out.residual("max_residual", worst_res);
    if t.restarts > 0 {
        out.residual("restart_spread", restart_spread);
    }
    result
}

fn zero_dn(cfg: SpectralConfig) -> DMatrix<f64> {
    DMatrix::zeros(cfg.field_dof(), cfg.field_dof())
}

fn random_state(rng: &mut ChaCha8Rng, cfg: SpectralConfig, size: f64) -> State {
    let mut field = || {
        let mut f = PeriodicField::zeros(cfg);
        for k in 1..=cfg.n_modes.min(8) {
            let a = size * 0.5_f64.powi(k as i32 - 1);
            f.set_coeff(
                k,
                Complex64::new(rng.gen_range(-a..a), rng.gen_range(-a..a)) * 0.5,
            );
        }
        f
    };
    let eta = field();
    let xi = field();
    State { eta, xi }
}

fn stokes(config: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let s = config.stokes.clone().unwrap_or_default();
    let tol = config.tolerances()?;
    let cfg = config.spectral_config()?;
    let (g, h) = (config.physical.g, config.physical.h);
    let p = PhysicalParams::flat(cfg, g, h, critical_speed(s.k, g, h))?;
    let current = p.current()?;
    let opts = StokesOptions {
        steps: s.steps,
        ds: s.ds,
        start_amplitude: s.start_amplitude,
        tol: tol.branch,
        max_amplitude: s.max_amplitude,
        ..Default::default()
    };
    let points = stokes_branch(s.k, &p, &current, &opts)?;
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, b)| {
            vec![
                i.into(),
                b.c.into(),
                b.amplitude.into(),
                b.arclength.into(),
                b.residual.into(),
                b.tangent_residual.into(),
                b.phase_residual.into(),
                b.orbit_nondegeneracy.into(),
                b.corrector_iters.into(),
                b.fourier_tail.into(),
            ]
        })
        .collect();
    out.csv(
        "stokes_branch.csv",
        &[
            "index",
            "c",
            "amplitude",
            "arclength",
            "residual",
            "tangent_residual",
            "phase_residual",
            "orbit_nondegeneracy",
            "corrector_iters",
            "fourier_tail",
        ],
        rows,
    )?;
    let last = points.last().expect("branch has a first point");
    out.json(
        "stokes_endpoint.json",
        &json!({ "c": last.c, "amplitude": last.amplitude, "state": last.u.to_json_value() }),
    )?;
    out.residual("points", points.len());
    out.residual("max_residual", points.iter().fold(0.0_f64, |a, b| a.max(b.residual)));
    out.residual(
        "max_tangent_residual",
        points.iter().fold(0.0_f64, |a, b| a.max(b.tangent_residual)),
    );
    Ok(())
}

fn persist(config: &RunConfig, bottom: &PeriodicField, out: &mut Outputs) -> Result<(), CliError> {
    let s = config.persist.clone().unwrap_or_default();
    let tol = config.tolerances()?;
    let cfg = *bottom.config();
    let (g, h) = (config.physical.g, config.physical.h);
    let flat = PhysicalParams::flat(cfg, g, h, critical_speed(s.k, g, h))?;
    let cur0 = flat.current()?;
    let sopts = StokesOptions {
        steps: s.steps,
        ds: s.ds,
        tol: tol.branch,
        ..Default::default()
    };
    let wave = stokes_wave(s.k, &flat, &cur0, s.amplitude, &sopts)?;
    out.residual("orbit_c", wave.c);
    out.residual("orbit_amplitude", wave.amplitude);
    out.residual("orbit_nondegeneracy", wave.orbit_nondegeneracy);
    out.residual("orbit_residual", wave.residual);
    let chart = SliceChart::new(wave.u.clone())?;
    let flat = flat.with_speed(wave.c);
    let solver = NormalSolver::at_orbit(&chart, &flat, &cur0, sopts.fd_eps)?;
    let p = flat.with_bottom(bottom.clone());
    let current = p.current()?;
    let popts = PersistenceOptions {
        tol: tol.normal,
        ..Default::default()
    };
    let samples = reduced_hamiltonian_adaptive(&chart, &solver, &p, &current, s.n_theta, s.max_doublings, &popts)?;
    let rows = samples
        .iter()
        .map(|r| {
            vec![
                r.theta.into(),
                r.h_value.into(),
                r.w.norm_x().into(),
                r.newton_iters.into(),
                r.residual.into(),
                r.mu.into(),
                r.derivative.into(),
            ]
        })
        .collect();
    out.csv(
        "reduced_h.csv",
        &["theta", "h_b", "w_norm", "newton_iters", "residual", "mu", "dh_dtheta"],
        rows,
    )?;
    let osc = oscillation(&samples);
    out.residual("samples", samples.len());
    out.residual("oscillation", osc);
    out.residual("sampling_period", chart.sampling_period(&p.b));
    out.residual("max_normal_residual", samples.iter().fold(0.0_f64, |a, r| a.max(r.residual)));
    let waves = find_persistent_waves(&samples, &chart, &solver, &p, &current, tol.refine, tol.flat, &popts)?;
    let all = extend_to_circle(&waves, chart.sampling_period(&p.b));
    let x = cfg.grid();
    let bg = bottom.to_grid();
    let mut surfaces = surface_rows(Cell::S("orbit".into()), &x, &vec![0.0; x.len()], &chart.u_c);
    let mut list = Vec::new();
    for (j, w) in all.iter().enumerate() {
        let label = format!("wave_{j}");
        surfaces.extend(surface_rows(Cell::S(label.clone()), &x, &bg, &w.u));
        list.push(json!({
            "label": label,
            "kind": w.kind,
            "phase": w.phase,
            "phase_offset": phase_offset(&w.u.eta, bottom),
            "h_value": w.h_value,
            "residual": w.residual,
            "w_norm": w.w_norm,
            "state": w.u.to_json_value(),
        }));
    }
    out.json(
        "persistent_waves.json",
        &json!({
            "orbit": { "k": s.k, "c": wave.c, "amplitude": wave.amplitude,
                       "nondegeneracy": wave.orbit_nondegeneracy, "period_index": chart.minimal_period_p },
            "waves": Value::Array(list),
        }),
    )?;
    out.csv("surfaces.csv", &["label", "x", "b", "eta", "xi"], surfaces)?;
    out.residual("persistent_waves", all.len());
    out.residual("max_wave_residual", waves.iter().fold(0.0_f64, |a, w| a.max(w.residual)));
    Ok(())
}

fn sweep(config: &RunConfig, bottom: &PeriodicField, out: &mut Outputs) -> Result<(), CliError> {
    let s = config.sweep.clone().expect("validated");
    let tol = config.tolerances()?;
    let gamma = config.trivial.as_ref().and_then(|t| t.gamma).unwrap_or(1.0);
    let cfg = *bottom.config();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(s.workers)
        .build()
        .map_err(|e| invalid("sweep.workers", e.to_string()))?;
    let opts = TrivialOptions {
        tol: tol.newton,
        gamma,
        ..Default::default()
    };
    let base = params(config, &bottom.scale(s.amplitudes[0]), s.speeds[0])?;
    // Bottom data per amplitude, then every (amplitude, speed) pair.
    let prepared: Vec<Result<_, steadywave::Error>> = pool.install(|| {
        s.amplitudes
            .par_iter()
            .map(|&a| {
                let b = bottom.scale(a);
                let p = base.with_bottom(b.clone());
                let cur = p.current()?;
                let dn = if b.is_zero() {
                    zero_dn(cfg)
                } else {
                    dn_difference_matrix(&cfg, &b, p.h)?
                };
                Ok((p, cur, dn))
            })
            .collect()
    });
    let jobs: Vec<(usize, f64)> = (0..s.amplitudes.len())
        .flat_map(|i| s.speeds.iter().map(move |&c| (i, c)))
        .collect();
    let results: Vec<Vec<Cell>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, c)| {
                let a = s.amplitudes[i];
                let outcome = match &prepared[i] {
                    Err(e) => Err(e.to_string()),
                    Ok((p, cur, dn)) => {
                        let p = p.with_speed(c);
                        let run = if p.b.is_zero() {
                            continue_trivial(&p, cur, &opts)
                        } else {
                            hessian_at_zero_with(&p, cur, dn)
                                .and_then(|hz| continue_trivial_from(&p, cur, &hz, &State::zeros(cfg), &opts))
                        };
                        run.map_err(|e| e.to_string())
                    }
                };
                match outcome {
                    Ok(r) => vec![
                        a.into(),
                        c.into(),
                        "ok".into(),
                        r.residual_norm.into(),
                        r.u.eta.max_abs().into(),
                        r.newton_iters.into(),
                        r.smallest_hessian_sv.into(),
                        "".into(),
                    ],
                    Err(e) => vec![
                        a.into(),
                        c.into(),
                        "failed".into(),
                        f64::NAN.into(),
                        f64::NAN.into(),
                        0usize.into(),
                        f64::NAN.into(),
                        e.into(),
                    ],
                }
            })
            .collect()
    });
    let failed = results
        .iter()
        .filter(|r| matches!(&r[2], Cell::S(s) if s == "failed"))
        .count();
    out.csv(
        "sweep.csv",
        &["amplitude", "c", "status", "residual", "eta_inf", "newton_iters", "sigma_min", "error"],
        results,
    )?;
    out.residual("runs", jobs.len());
    out.residual("failed_runs", failed);
    out.residual("workers", s.workers);
    Ok(())
}
