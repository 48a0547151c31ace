use proptest::prelude::*;
use steadywave::dirichlet_neumann::{dn_apply, dn_flat_bottom_linearized, FluidDomain};
use steadywave::fourier::{PeriodicField, SpectralConfig};

const K: usize = 16;

fn cfg() -> SpectralConfig {
    SpectralConfig::with_modes(K)
}

fn g0(f: &PeriodicField, h: f64) -> PeriodicField {
    f.flat_dn_apply(h)
}

fn sech(f: &PeriodicField, h: f64) -> PeriodicField {
    f.map_symbol(|k| (1.0 / (h * k as f64).cosh()).into())
}

fn mul(a: &PeriodicField, b: &PeriodicField) -> PeriodicField {
    a.product(b).0
}

fn dn(eta: &PeriodicField, b: &PeriodicField, h: f64, xi: &PeriodicField) -> PeriodicField {
    let domain = FluidDomain::new(eta.clone(), b.clone(), h).unwrap();
    dn_apply(&domain, xi, 32).unwrap().0
}

fn rel(a: &PeriodicField, b: &PeriodicField) -> f64 {
    a.axpy(-1.0, b).max_abs() / b.max_abs()
}

#[test]
fn surface_variation_matches_first_order_expansion() {
    let c = cfg();
    let h = 0.8;
    let eta = PeriodicField::cosine(c, 1, 1.0).axpy(1.0, &PeriodicField::sine(c, 2, 0.5));
    let xi = PeriodicField::cosine(c, 3, 1.0).axpy(1.0, &PeriodicField::sine(c, 1, 0.5));
    // D η D ξ − G0 η G0 ξ with D = −i∂x.
    let oracle = mul(&eta, &xi.derivative())
        .derivative()
        .scale(-1.0)
        .axpy(-1.0, &g0(&mul(&eta, &g0(&xi, h)), h));
    let linear = dn_flat_bottom_linearized(&eta, &xi, h).unwrap();
    let e = rel(&linear, &oracle);
    assert!(e < 1e-6, "relative error {e}");
}

#[test]
fn bottom_variation_matches_first_order_expansion() {
    let c = cfg();
    let h = 0.8;
    let zero = PeriodicField::zeros(c);
    let b = PeriodicField::cosine(c, 1, 1.0).axpy(1.0, &PeriodicField::cosine(c, 2, -0.3));
    let xi = PeriodicField::cosine(c, 2, 1.0).axpy(1.0, &PeriodicField::sine(c, 1, 0.7));
    // sech(hD) ∂x(b ∂x sech(hD) ξ).
    let oracle = sech(&mul(&b, &sech(&xi, h).derivative()).derivative(), h);
    let eps = 1e-3;
    let diff = |e: f64| dn(&zero, &b.scale(e), h, &xi).axpy(-1.0, &dn(&zero, &b.scale(-e), h, &xi)).scale(0.5 / e);
    let linear = diff(0.5 * eps).scale(4.0 / 3.0).axpy(-1.0 / 3.0, &diff(eps));
    let e = rel(&linear, &oracle);
    assert!(e < 1e-6, "relative error {e}");
}

#[test]
fn constants_are_annihilated() {
    let c = cfg();
    let eta = PeriodicField::cosine(c, 1, 0.1);
    let b = PeriodicField::sine(c, 2, 0.1);
    // A mean-free field carries no constant, so probe the grid mean of the output.
    let xi = PeriodicField::cosine(c, 1, 1.0);
    let domain = FluidDomain::new(eta, b, 1.0).unwrap();
    let (_, report) = dn_apply(&domain, &xi, 32).unwrap();
    assert!(report.output_mean.abs() < 1e-10, "mean {}", report.output_mean);
}

fn small_field(scale: f64) -> impl Strategy<Value = PeriodicField> {
    prop::collection::vec(-1.0..1.0f64, 6).prop_map(move |v| {
        let c = cfg();
        (0..3).fold(PeriodicField::zeros(c), |f, k| {
            let a = scale * 0.5f64.powi(k as i32);
            f.axpy(a * v[2 * k], &PeriodicField::cosine(c, k + 1, 1.0))
                .axpy(a * v[2 * k + 1], &PeriodicField::sine(c, k + 1, 1.0))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn dn_is_symmetric_and_positive(
        eta in small_field(0.05),
        b in small_field(0.05),
        x1 in small_field(1.0),
        x2 in small_field(1.0),
    ) {
        prop_assume!(x1.max_abs() > 0.1 && x2.max_abs() > 0.1);
        let h = 1.0;
        let g1 = dn(&eta, &b, h, &x1);
        let g2 = dn(&eta, &b, h, &x2);
        let asym = (g1.inner(&x2) - x1.inner(&g2)).abs();
        prop_assert!(asym < 1e-9 * (1.0 + g1.inner(&x1).abs()), "asymmetry {}", asym);
        prop_assert!(g1.inner(&x1) > 0.0);
    }
}
