use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use fracplane_core::extension::*;
use fracplane_core::geometry::{Aabb, Domain, Grid};
use fracplane_core::special::gamma;
use proptest::prelude::*;

fn getoor_source(s: f64) -> ExtensionField {
    let support = Aabb { lo: [-1.0, 0.0], hi: [1.0, 0.0] };
    ExtensionField::from_fn(1, s, support, Arc::new(move |z| (1.0 - z[0] * z[0]).max(0.0).powf(s))).unwrap()
}

#[test]
fn neumann_limit_recovers_fractional_laplacian() {
    // (-Lap)^s (1 - x^2)_+^s = Gamma(1 + 2s) inside (-1, 1)
    for &s in &[0.3, 0.5, 0.7] {
        let field = getoor_source(s);
        let expected = gamma(1.0 + 2.0 * s);
        for &x in &[0.0, 0.35] {
            let lim = field.neumann_limit(x).unwrap();
            let rel = (-lim / d_s(s) - expected).abs() / expected;
            assert!(rel < 1e-4, "s={s} x={x}: {} vs {expected}", -lim / d_s(s));
        }
    }
}

#[test]
fn extension_is_harmonic_for_the_weighted_operator() {
    let s = 0.35;
    let field = getoor_source(s);
    let (x, y, d) = (0.2, 0.4, 1e-3);
    let w = |a: f64, b: f64| field.extend(&[a, 0.0], b).unwrap();
    let wxx = (w(x + d, y) - 2.0 * w(x, y) + w(x - d, y)) / (d * d);
    let wy = (w(x, y + d) - w(x, y - d)) / (2.0 * d);
    let wyy = (w(x, y + d) - 2.0 * w(x, y) + w(x, y - d)) / (d * d);
    let l = wxx + wyy + (1.0 - 2.0 * s) / y * wy;
    assert!(l.abs() < 1e-5 * wxx.abs().max(1.0), "{l}");
}

#[test]
fn extension_tends_to_the_source() {
    let field = getoor_source(0.5);
    let v = (1.0f64 - 0.3 * 0.3).sqrt();
    let w = field.extend(&[0.3, 0.0], 1e-5).unwrap();
    assert!((w - v).abs() < 1e-4);
}

#[test]
fn folded_matches_direct_for_antisymmetric_cells() {
    let dom = Domain::rectangle(1.0, 0.5).unwrap();
    let grid = Grid::new(&dom, 1.0 / 8.0).unwrap();
    let lambda = 0.25;
    let values: Vec<f64> = grid
        .centers()
        .iter()
        .enumerate()
        .map(|(i, c)| match grid.mirror(i, lambda) {
            Some(_) => (c[0] - lambda) * (1.0 + c[1] * c[1]),
            None => 0.0,
        })
        .collect();
    let field = ExtensionField::from_cells(&grid, values, 0.4).unwrap();
    for p in [[0.6, 0.1], [0.3, -0.2], [1.3, 0.4]] {
        let direct = field.extend(&p, 0.3).unwrap();
        let folded = field.extend_folded(&p, 0.3, lambda).unwrap();
        assert_relative_eq!(direct, folded, epsilon = 1e-9, max_relative = 1e-8);
    }
}

#[test]
fn interval_eigenpair() {
    let eig = principal_eigenpair(1.0, 1, 1.0 / 128.0).unwrap();
    assert_relative_eq!(eig.lambda1, PI * PI / 4.0, max_relative = 1e-4);
    for &x in &[0.0, 0.3, -0.77, 0.999] {
        assert!((eig.eval(&[x, 0.0]) - (PI * x / 2.0).cos()).abs() < 1e-3);
    }
    assert!(eig.residual() < 1e-6);
    // int cos(pi x / 2)^{1/2} = (2/pi) B(3/4, 1/2)
    let exact = 2.0 / PI * gamma(0.75) * PI.sqrt() / gamma(1.25);
    assert_relative_eq!(eig.sqrt_integral(), exact, max_relative = 1e-3);
}

#[test]
fn disk_eigenpair() {
    // first zero of J0
    let j01: f64 = 2.404_825_557_695_773;
    let eig = principal_eigenpair(0.5, 2, 1.0 / 64.0).unwrap();
    assert_relative_eq!(eig.lambda1, (j01 / 0.5).powi(2), max_relative = 2e-3);
    assert!(eig.psi.iter().all(|v| *v > 0.0));
    assert_relative_eq!(eig.eval(&[0.0, 0.0]), 1.0, max_relative = 1e-12);
}

#[test]
fn profile_solves_the_ode() {
    for &s in &[0.25, 0.5, 0.75] {
        let p = bessel_profile(s, 2.0, &log_ygrid(1e-2, 3.0, 400)).unwrap();
        let r = p.ode_residual().unwrap();
        assert!(r < 1e-9, "s={s}: {r}");
        assert_eq!(p.value(0.0).unwrap(), 1.0);
        assert!(p.f.windows(2).all(|w| w[1] < w[0]));
        // f(y) ~ 1 - kappa1 y^{2s} / (2s) near zero
        let y: f64 = 1e-4;
        let approx_f = 1.0 - p.kappa1 * y.powf(2.0 * s) / (2.0 * s);
        assert!((p.value(y).unwrap() - approx_f).abs() < 10.0 * y.powf((4.0 * s).min(2.0)));
    }
}

#[test]
fn kappa2_matches_profile_limit() {
    // y^{1-2s} f'(y) -> -kappa1 as y -> 0
    for &s in &[0.3, 0.6] {
        let p = bessel_profile(s, 1.5, &[]).unwrap();
        let c = extension_constants(s, 1.5, Some(&p)).unwrap();
        assert_relative_eq!(c.kappa2, -c.kappa1 / (1.0 - p.f_at_1), max_relative = 1e-6);
        assert!(c.kappa2 < 0.0);
    }
    let p = bessel_profile(0.5, 1.0, &[]).unwrap();
    let c = extension_constants(0.5, 1.0, Some(&p)).unwrap();
    assert!((c.kappa2 + 1.5820).abs() < 1e-4);
    assert!(matches!(extension_constants(0.5, 1.0, None), Err(fracplane_core::Error::ProfileUnavailable)));
}

#[test]
fn barrier_is_a_supersolution_of_the_extension_operator() {
    let eig = principal_eigenpair(1.0, 1, 1.0 / 64.0).unwrap();
    let s = 0.4;
    let p = bessel_profile(s, eig.lambda1, &[]).unwrap();
    let r = barrier_residual(&p, &eig, 1.0, 0.5, &[0.1, 0.5, 0.9], 1e-3).unwrap();
    assert!(r > -1e-6, "{r}");
    // vanishes at y = 1 and on the lateral boundary
    assert_eq!(barrier(0.0, &[1.0, 0.0], 0.3, &p, &eig, 1.0).unwrap(), 0.0);
    assert!(barrier(0.0, &[0.0, 0.0], 1.0, &p, &eig, 1.0).unwrap().abs() < 1e-14);
    assert_relative_eq!(barrier(0.0, &[0.0, 0.0], 0.0, &p, &eig, 1.0).unwrap(), 1.0, max_relative = 1e-12);
}

#[test]
fn kleiner_constants_are_positive() {
    for n in 1..=2 {
        for &s in &[0.2, 0.5, 0.9] {
            let (c1, c2) = kleiner_constants(n, s, 0.5).unwrap();
            assert!(c1 > 0.0 && c2 > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_is_additive(s in 0.05f64..0.95, a in -3.0f64..3.0, w1 in 0.0f64..2.0, w2 in 0.0f64..2.0, y in 0.01f64..4.0) {
        let k = PoissonKernel::new(1, s).unwrap();
        let whole = k.mass_1d(a, a + w1 + w2, y);
        let parts = k.mass_1d(a, a + w1, y) + k.mass_1d(a + w1, a + w1 + w2, y);
        prop_assert!((whole - parts).abs() < 1e-12);
        prop_assert!(whole >= -1e-15 && whole <= 1.0 + 1e-12);
    }

    #[test]
    fn kernel_scaling(s in 0.05f64..0.95, x in -2.0f64..2.0, y in 0.05f64..2.0, t in 0.2f64..5.0) {
        let g = poisson_kernel(&[x, 0.0], y, 1, s).unwrap();
        let gt = poisson_kernel(&[t * x, 0.0], t * y, 1, s).unwrap();
        prop_assert!((gt * t - g).abs() <= 1e-12 * g.max(1e-300));
    }
}

#[test]
fn cosine_extends_to_damped_cosine() {
    let support = Aabb { lo: [-20.0, 0.0], hi: [20.0, 0.0] };
    let field = ExtensionField::from_fn(1, 0.5, support, Arc::new(|z| z[0].cos())).unwrap();
    let w = field.extend(&[0.0, 0.0], 1.0).unwrap();
    assert!((w - (-1.0f64).exp()).abs() < 2e-3, "{w}");
}

#[test]
fn even_source_has_zero_folded_extension() {
    let support = Aabb { lo: [-2.0, 0.0], hi: [2.0, 0.0] };
    let v = |z: f64| (-z * z).exp() * (1.0 + z * z);
    // V_0 v = v o Q - v
    let field = ExtensionField::from_fn(1, 0.3, support, Arc::new(move |z| v(-z[0]) - v(z[0]))).unwrap();
    for x in [-0.4, 0.2, 0.9, 1.7] {
        assert!(field.extend(&[x, 0.0], 0.5).unwrap().abs() < 1e-13);
        assert!(field.extend_folded(&[x, 0.0], 0.5, 0.0).unwrap().abs() < 1e-13);
    }
}

#[test]
fn eigenvalue_scales_with_radius() {
    let a = principal_eigenpair(1.0, 1, 1.0 / 64.0).unwrap();
    let b = principal_eigenpair(2.0, 1, 1.0 / 32.0).unwrap();
    assert_relative_eq!(b.lambda1, a.lambda1 / 4.0, max_relative = 1e-10);
}

#[test]
fn extension_lower_bound_holds() {
    // x0 = 1, rho = 1/2: B_{2 rho}(x0) = (0, 2) sits in H = {x > 0}
    let (x0, rho) = (1.0, 0.5);
    for &s in &[0.25, 0.5, 0.75] {
        let (c1, c2) = kleiner_constants(1, s, rho).unwrap();
        let bump = |z: f64| z * (-z * z).exp();
        // negative mass far from the ball
        let v = move |z: f64| bump(z) - 0.02 * z.signum() * (-(z.abs() - 4.0).powi(2) * 4.0).exp();
        let support = Aabb { lo: [-7.0, 0.0], hi: [7.0, 0.0] };
        let field = ExtensionField::from_fn(1, s, support, Arc::new(move |z| v(z[0]))).unwrap();
        let root = fracplane_core::quadrature::integrate(
            |z| v(z).max(0.0).sqrt(),
            x0 - rho,
            x0 + rho,
            fracplane_core::quadrature::Tolerance::new(1e-14, 1e-12),
        )
        .unwrap();
        let bound = c1 * root * root - c2 * 0.02;
        for &x in &[0.55, 1.0, 1.45] {
            for &y in &[1e-3, 0.1, 0.5, 1.0] {
                let w = field.extend(&[x, 0.0], y).unwrap();
                assert!(w / y.powf(2.0 * s) >= bound, "s={s} x={x} y={y}");
            }
        }
    }
}
