use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use steadywave::continuation::{stokes_wave, StokesOptions};
use steadywave::fourier::{PeriodicField, SpectralConfig, State};
use steadywave::hamiltonian::{hamiltonian_value, PhysicalParams};
use steadywave::persistence::*;

const K: usize = 16;

struct Fixture {
    chart: SliceChart,
    solver: NormalSolver,
    params: PhysicalParams,
}

// `NormalSolver` keeps its refreshed Jacobian in a `RefCell`, so each test
// thread builds its own fixture from a shared orbit.
fn orbit() -> &'static (State, f64) {
    static ORBIT: OnceLock<(State, f64)> = OnceLock::new();
    ORBIT.get_or_init(|| {
        let cfg = SpectralConfig::with_modes(K);
        let p = PhysicalParams::flat(cfg, 1.0, 0.2, 0.4).unwrap();
        let cur = p.current().unwrap();
        let opts = StokesOptions {
            steps: 60,
            ds: 0.006,
            ..Default::default()
        };
        let wave = stokes_wave(1, &p, &cur, 0.02, &opts).unwrap();
        (wave.u, wave.c)
    })
}

fn fixture() -> Fixture {
    let (u, c) = orbit();
    let chart = SliceChart::new(u.clone()).unwrap();
    let params = PhysicalParams::flat(SpectralConfig::with_modes(K), 1.0, 0.2, *c).unwrap();
    let cur = params.current().unwrap();
    let solver = NormalSolver::at_orbit(&chart, &params, &cur, 1e-6).unwrap();
    Fixture { chart, solver, params }
}

fn with_bottom(f: &Fixture, b: PeriodicField) -> (PhysicalParams, steadywave::bottom_current::HarmonicCurrent) {
    let p = f.params.with_bottom(b);
    let cur = p.current().unwrap();
    (p, cur)
}

fn opts() -> PersistenceOptions {
    PersistenceOptions::default()
}

#[test]
fn flat_bottom_reduced_hamiltonian_is_constant() {
    let f = fixture();
    let cur = f.params.current().unwrap();
    let h_c = hamiltonian_value(&f.chart.u_c, &f.params, &cur).unwrap();
    let samples = reduced_hamiltonian(&f.chart, &f.solver, &f.params, &cur, 12, &opts()).unwrap();
    for s in &samples {
        assert!((s.h_value - h_c).abs() < 1e-12 * (1.0 + h_c.abs()));
        assert!(s.w.norm_x() < 1e-9, "w {}", s.w.norm_x());
        assert!(s.derivative.abs() < 1e-10);
    }
    assert!(oscillation(&samples) < 1e-12 * (1.0 + h_c.abs()));
}

#[test]
fn derivative_matches_phase_differences() {
    let f = fixture();
    let cfg = SpectralConfig::with_modes(K);
    let (p, cur) = with_bottom(&f, PeriodicField::cosine(cfg, 1, 1e-4).axpy(1.0, &PeriodicField::sine(cfg, 1, 5e-5)));
    let zero = State::zeros(cfg);
    let delta = 1e-3;
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for &theta in &[0.4, 1.3, 2.9, 4.4] {
        let s = solve_normal(&f.chart, &f.solver, theta, &p, &cur, &zero, &opts()).unwrap();
        let hp = solve_normal(&f.chart, &f.solver, theta + delta, &p, &cur, &s.w, &opts()).unwrap().h_value;
        let hm = solve_normal(&f.chart, &f.solver, theta - delta, &p, &cur, &s.w, &opts()).unwrap().h_value;
        let fd = (hp - hm) / (2.0 * delta);
        scale = scale.max(s.derivative.abs());
        worst = worst.max((fd - s.derivative).abs());
    }
    assert!(worst < 1e-4 * scale, "derivative gap {worst:e} at scale {scale:e}");
}

#[test]
fn normal_solutions_stay_on_the_slice() {
    let f = fixture();
    let cfg = SpectralConfig::with_modes(K);
    let (p, cur) = with_bottom(&f, PeriodicField::cosine(cfg, 1, 1e-4));
    let samples = reduced_hamiltonian(&f.chart, &f.solver, &p, &cur, 8, &opts()).unwrap();
    for s in &samples {
        assert!(s.w.inner(&f.chart.tangent).abs() < 1e-10);
        assert!(s.residual < 1e-11);
    }
}

#[test]
fn even_bottom_gives_even_reduced_hamiltonian() {
    let f = fixture();
    let cfg = SpectralConfig::with_modes(K);
    let (p, cur) = with_bottom(&f, PeriodicField::cosine(cfg, 1, 1e-4));
    let zero = State::zeros(cfg);
    for &theta in &[0.5, 1.7, 2.6] {
        let a = solve_normal(&f.chart, &f.solver, theta, &p, &cur, &zero, &opts()).unwrap();
        let b = solve_normal(&f.chart, &f.solver, -theta, &p, &cur, &zero, &opts()).unwrap();
        assert!((a.h_value - b.h_value).abs() < 1e-14, "{} vs {}", a.h_value, b.h_value);
        assert!((a.derivative + b.derivative).abs() < 1e-10 * (1.0 + a.derivative.abs()));
    }
}

#[test]
fn warm_started_steps_converge_quickly() {
    let f = fixture();
    let cfg = SpectralConfig::with_modes(K);
    let (p, cur) = with_bottom(&f, PeriodicField::cosine(cfg, 1, 1e-4));
    let zero = State::zeros(cfg);
    let step = 2.0 * PI / 256.0;
    for &theta in &[0.0, 1.2, 3.5, 5.0] {
        let s = solve_normal(&f.chart, &f.solver, theta, &p, &cur, &zero, &opts()).unwrap();
        let next = solve_normal(&f.chart, &f.solver, theta + step, &p, &cur, &s.w, &opts()).unwrap();
        assert!(next.newton_iters <= 5, "{} iterations at θ = {}", next.newton_iters, theta + step);
    }
}

#[test]
fn local_chart_is_first_order_translation() {
    let f = fixture();
    let cfg = SpectralConfig::with_modes(K);
    let w = State::new(PeriodicField::cosine(cfg, 2, 1e-4), PeriodicField::sine(cfg, 3, 1e-4)).unwrap();
    // Near θ = 0, υ(θ, w) ≈ u_c + w + θ ∂_θ υ(0, w).
    let base = slice_embed(&f.chart, 0.0, &w);
    let d = base.axpy(-1.0, &slice_embed(&f.chart, 1e-6, &w)).scale(-1e6);
    let remainder = |theta: f64| slice_embed(&f.chart, theta, &w).axpy(-1.0, &base).axpy(-theta, &d).norm_x();
    let ratio = remainder(2e-3) / remainder(1e-3);
    assert!((ratio - 4.0).abs() < 0.05, "remainder ratio {ratio}");
    assert!(base.axpy(-1.0, &f.chart.u_c.axpy(1.0, &w)).norm_x() < 1e-15);
    // The phase derivative of the chart at w = 0 is the tangent up to normalisation.
    let t = f.chart.tangent.scale(f.chart.u_c.derivative().l2_norm());
    let dt = f.chart.u_c.axpy(-1.0, &slice_embed(&f.chart, 1e-6, &State::zeros(cfg))).scale(1e6);
    let gap = dt.axpy(-1.0, &t).norm_x().min(dt.axpy(1.0, &t).norm_x());
    assert!(gap < 1e-5 * t.norm_x(), "tangent gap {gap}");
}

#[test]
fn persistent_waves_are_critical_points() {
    let f = fixture();
    let cfg = SpectralConfig::with_modes(K);
    let (p, cur) = with_bottom(&f, PeriodicField::cosine(cfg, 1, 1e-4));
    let samples = reduced_hamiltonian_adaptive(&f.chart, &f.solver, &p, &cur, 16, 2, &opts()).unwrap();
    let waves = find_persistent_waves(&samples, &f.chart, &f.solver, &p, &cur, 1e-9, 1e-10, &opts()).unwrap();
    let maxima = waves.iter().filter(|w| w.kind == ExtremumKind::Max).count();
    let minima = waves.iter().filter(|w| w.kind == ExtremumKind::Min).count();
    assert_eq!((maxima, minima), (1, 1));
    for w in &waves {
        assert!(w.residual < 1e-9, "residual {}", w.residual);
        // Even bottom and even orbit put the critical phases at 0 and π.
        let d = w.phase.rem_euclid(PI);
        assert!(d.min(PI - d) < 1e-6, "phase {}", w.phase);
    }
}

fn small_state() -> impl Strategy<Value = State> {
    prop::collection::vec(-1e-3..1e-3f64, 4 * K)
        .prop_map(|v| State::from_vec(SpectralConfig::with_modes(K), &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn slice_embedding_is_equivariant(w in small_state(), a in -PI..PI, b in -PI..PI) {
        let cfg = SpectralConfig::with_modes(K);
        let u_c = State::new(PeriodicField::cosine(cfg, 1, 0.02), PeriodicField::sine(cfg, 1, 0.01)).unwrap();
        let chart = SliceChart::new(u_c).unwrap();
        let lhs = slice_embed(&chart, a, &w).translate(b);
        let rhs = slice_embed(&chart, a + b, &w);
        let gap = lhs.axpy(-1.0, &rhs).norm_x();
        prop_assert!(gap < 1e-14 * rhs.norm_x(), "gap {}", gap);
        let full = slice_embed(&chart, a + 2.0 * PI, &w);
        prop_assert!(full.axpy(-1.0, &slice_embed(&chart, a, &w)).norm_x() < 1e-13 * rhs.norm_x());
    }
}
