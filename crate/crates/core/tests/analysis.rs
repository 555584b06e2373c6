use std::f64::consts::PI;
use fracplane_core::analysis::*;
use fracplane_core::extension::{bessel_profile, principal_eigenpair, subsolution_constants};
use fracplane_core::fracops::{assemble_operator, small_volume_delta, FracParams, NonlocalOperator, DEFAULT_CAP};
use fracplane_core::geometry::{Domain, Grid, Point};
use fracplane_core::solver::*;
use fracplane_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn interval(h: f64) -> (Domain, Grid) {
    let d = Domain::interval(1.0).unwrap();
    let g = Grid::new(&d, h).unwrap();
    (d, g)
}

fn operator(d: &Domain, g: &Grid, s: f64) -> NonlocalOperator {
    assemble_operator(g, d, &FracParams::new(d.dim, s).unwrap(), DEFAULT_CAP).unwrap()
}

fn from_fn(g: &Grid, f: impl Fn(&Point) -> f64) -> Vec<f64> {
    g.centers().iter().map(f).collect()
}

fn synthetic(times: Vec<f64>, states: Vec<Vec<f64>>) -> Trajectory {
    let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    Trajectory { times, states, dt, scheme: "synthetic".into(), range_warnings: 0 }
}

#[test]
fn reflection_difference_examples() {
    let (_, g) = interval(1.0 / 16.0);
    let even = from_fn(&g, |x| (PI * x[0] / 2.0).cos());
    for lambda in [0.0, 0.0 + 1e-3] {
        let d = reflect_diff(&even, lambda, &g).unwrap();
        if lambda == 0.0 {
            assert_eq!(d.abs_max(), 0.0);
        }
    }
    let (_, g2) = interval(0.5);
    let u = from_fn(&g2, |x| x[0]);
    let d = reflect_diff(&u, 0.5, &g2).unwrap();
    let k = d.cells.iter().position(|&i| (g2.center(i)[0] - 0.75).abs() < 1e-12).unwrap();
    assert!((d.values[k] + 0.5).abs() < 1e-15);

    // off-lattice plane: interpolation of a linear function is exact inside
    let u = from_fn(&g, |x| x[0]);
    let d = reflect_diff(&u, 0.3, &g).unwrap();
    for (i, v) in d.cells.iter().zip(&d.values) {
        let x = g.center(*i)[0];
        if 0.6 - x > -1.0 + 1.0 / 32.0 {
            assert!((v - (0.6 - 2.0 * x)).abs() < 1e-12);
        }
    }

    // supported left of the plane: V = u o Q >= 0
    let left = from_fn(&g, |x| if x[0] < 0.25 { 1.0 - x[0] * x[0] } else { 0.0 });
    assert!(reflect_diff(&left, 0.25, &g).unwrap().values.iter().all(|v| *v >= 0.0));
    assert!(matches!(reflect_diff(&left, 0.999, &g), Err(Error::EmptyCap { .. })));
}

#[test]
fn reflection_difference_is_antisymmetric() {
    let (_, g) = interval(1.0 / 32.0);
    let u = from_fn(&g, |x| (1.0 - x[0] * x[0]) * (1.0 + 0.3 * x[0]));
    let lambda = 0.25;
    let v = reflect_diff_full(&u, lambda, &g).unwrap();
    for i in 0..g.len() {
        if let Some(m) = g.mirror(i, lambda) {
            assert_eq!(v[m], -v[i]);
        }
    }
}

#[test]
fn decay_classification() {
    let times: Vec<f64> = (0..101).map(|k| k as f64 * 0.1).collect();
    let cfg = DecayConfig::default();
    let zero = vec![0.0; times.len()];
    let (rate, _, v) = classify_decay(&times, &zero, &cfg).unwrap();
    assert_eq!(v, Verdict::Holds);
    assert!(rate.is_infinite());
    let exp: Vec<f64> = times.iter().map(|t| 0.3 * (-t).exp()).collect();
    let (rate, _, v) = classify_decay(&times, &exp, &cfg).unwrap();
    assert_eq!(v, Verdict::Holds);
    assert!((rate - 1.0).abs() < 0.05);
    let flat: Vec<f64> = times.iter().map(|t| 0.1 + 0.01 * t.sin()).collect();
    assert_eq!(classify_decay(&times, &flat, &cfg).unwrap().2, Verdict::Fails);
    assert!(matches!(classify_decay(&times[..3], &zero[..3], &cfg), Err(Error::TooShort(_))));
}

#[test]
fn omega_limit_examples() {
    let (_, g) = interval(1.0 / 16.0);
    let z = from_fn(&g, |x| 1.0 - x[0] * x[0]);
    let times: Vec<f64> = (0..20).map(|k| k as f64).collect();
    let constant = synthetic(times.clone(), vec![z.clone(); 20]);
    let om = omega_limit(&constant, (5.0, 19.0), 1e-6).unwrap();
    assert_eq!(om.profiles.len(), 1);
    assert!(om.settled);

    let converging = synthetic(times.clone(), times.iter().map(|t| z.iter().map(|v| v * (1.0 + (-t).exp())).collect()).collect());
    let om = omega_limit(&converging, (15.0, 19.0), 1e-4).unwrap();
    assert_eq!(om.profiles.len(), 1);
    assert!(sup(&om.profiles[0], &z) < 1e-4);
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn periodic_forcing_gives_one_profile_per_phase() {
    // a(t) = 1 + 0.2 sin(2 pi t); on (-2, 2) the principal eigenvalue is below
    // the mean growth rate, so the periodic orbit is nontrivial
    let d = Domain::interval(2.0).unwrap();
    let g = Grid::new(&d, 1.0 / 8.0).unwrap();
    let op = operator(&d, &g, 0.5);
    let period = 1.0;
    let f = Nonlinearity::allen_cahn(Coef::Sinusoid { mean: 1.0, amp: 0.2, period }, Coef::Constant(1.0));
    let dt = 1.0 / 200.0;
    let u0 = from_fn(&g, |x| 0.5 * (1.0 - x[0].abs() / 2.0));
    // snapshots at quarter periods
    let traj = ImexStepper::new(&op, dt).unwrap().run(&u0, 0.0, 200 * 60, 50, &f).unwrap();
    let om = omega_limit(&traj, (50.0, 60.0), 1e-3).unwrap();
    assert_eq!(om.profiles.len(), 4, "{:?}", om.distances);
    assert!(om.counts.iter().all(|c| *c >= 10));
    assert!(om.profiles.iter().all(|z| Trajectory::sup_norm(z) > 0.1));
}

#[test]
fn symmetry_verdict_examples() {
    let (_, g) = interval(1.0 / 64.0);
    let tol = SymmetryTolerances::for_run(g.h(), 1.0);
    let cosine = from_fn(&g, |x| (PI * x[0] / 2.0).cos());
    assert!(symmetry_verdict_profile(&cosine, &g, &tol).pass);
    let zero = vec![0.0; g.len()];
    let v = symmetry_verdict_profile(&zero, &g, &tol);
    assert!(v.pass && v.zero);
    let shifted = from_fn(&g, |x| (1.0 - (x[0] - 0.1).powi(2)).max(0.0));
    let v = symmetry_verdict_profile(&shifted, &g, &tol);
    assert!(!v.pass);
    let w = v.asymmetry_witness.unwrap();
    assert!((w[0].abs() - 0.9).abs() <= 2.0 * g.h(), "{w:?}");
}

#[test]
fn symmetry_verdict_on_a_disk() {
    let d = Domain::disk(1.0).unwrap();
    let g = Grid::new(&d, 1.0 / 16.0).unwrap();
    let tol = SymmetryTolerances::for_run(g.h(), 1.0);
    let bowl = from_fn(&g, |x| 1.0 - x[0] * x[0] - 0.5 * x[1] * x[1]);
    assert!(symmetry_verdict_profile(&bowl, &g, &tol).pass);
    let ring = from_fn(&g, |x| x[0] * x[0]);
    assert!(!symmetry_verdict_profile(&ring, &g, &tol).monotone);
}

#[test]
fn sweep_on_even_data_holds_everywhere() {
    let (d, g) = interval(1.0 / 32.0);
    let op = operator(&d, &g, 0.5);
    let f = Nonlinearity::allen_cahn(Coef::Constant(1.0), Coef::Constant(1.0));
    let u0 = from_fn(&g, |x| 0.8 * (1.0 - x[0].abs()));
    let traj = ImexStepper::new(&op, 1e-2).unwrap().run(&u0, 0.0, 200, 10, &f).unwrap();
    let lambdas: Vec<f64> = (1..=8).map(|j| (2 * j - 1) as f64 / 16.0).collect();
    let rep = lambda_sweep(&traj, &g, &lambdas, &DecayConfig::default()).unwrap();
    assert!(rep.reports.iter().all(|r| r.verdict == Verdict::Holds));
    assert_eq!(rep.lambda0, 0.0);
}

#[test]
fn reflected_residual_is_nonnegative_for_allen_cahn() {
    let (d, g) = interval(1.0 / 32.0);
    let op = operator(&d, &g, 0.5);
    let f = Nonlinearity::allen_cahn(Coef::Constant(1.0), Coef::Constant(1.0));
    let u0 = from_fn(&g, |x| (0.8 * (1.0 - x[0].abs()) * (1.0 + 0.4 * x[0])).clamp(0.0, 1.0));
    let dt = 1e-3;
    let traj = ImexStepper::new(&op, dt).unwrap().run(&u0, 0.0, 1000, 1, &f).unwrap();
    let (res, c_inf) = reflected_residual(&traj, &g, &op, &f, 0.25).unwrap();
    assert!(c_inf <= 2.0 + 1e-9);
    // skip the initial layer where u0 has kinks
    let worst = res[50..res.len() - 1].iter().flatten().copied().fold(f64::INFINITY, f64::min);
    assert!(worst > -5e-2, "{worst}");
}

#[test]
fn chain_examples() {
    let pts: Vec<Point> = (0..40).map(|k| [k as f64 * 0.025, 0.0]).collect();
    // r0 large enough that n = 3
    let chain = build_chain(1, &pts, 0.4, 7.0, 2.0, pts[0], pts[39], 8.0, 24.0).unwrap();
    assert_eq!(chain.n, 3);
    assert!((chain.theta - 1.0 / 17.0).abs() < 1e-15);
    chain.check(&pts, 24.0).unwrap();

    let gap: Vec<Point> = vec![[0.0, 0.0], [0.1, 0.0], [2.0, 0.0]];
    assert!(matches!(build_chain(1, &gap, 0.3, 1.0, 5.0, gap[0], gap[2], 1.0, 3.0), Err(Error::NetFailure(_))));
}

fn random_chain_case(rng: &mut ChaCha8Rng) -> (usize, Vec<Point>, f64, f64, f64, f64) {
    let dim = rng.random_range(1..=2);
    let h = rng.random_range(0.02..0.1);
    let (a, b) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
    let dom = if dim == 1 { Domain::interval(a).unwrap() } else { Domain::rectangle(a, b).unwrap() };
    let pts = Grid::new(&dom, h).unwrap().centers().to_vec();
    let r0 = rng.random_range(1.5 * h..1.0);
    let tau = rng.random_range(0.1..10.0);
    let t_start = rng.random_range(tau..2.0 * tau);
    let t_end = rng.random_range(3.0 * tau..4.0 * tau);
    (dim, pts, r0, tau, t_start, t_end)
}

#[test]
fn chain_invariants_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let (dim, pts, r0, tau, ts, te) = random_chain_case(&mut rng);
        let a = rng.random_range(0..pts.len());
        let b = rng.random_range(0..pts.len());
        let chain = build_chain(dim, &pts, r0, tau, 10.0, pts[a], pts[b], ts, te).unwrap();
        chain.check(&pts, te).unwrap();
    }
}

#[test]
fn small_volume_maximum_principle() {
    let (d, g) = interval(1.0 / 64.0);
    let s = 0.5;
    let params = FracParams::new(1, s).unwrap();
    let op = operator(&d, &g, s);
    let c = LinearCoefficient::constant(1.0);
    let delta = small_volume_delta(1.0, 1.0, &params).unwrap();
    let half = g.select(|x| x[0] > 0.0);
    // region of measure <= delta / 2 around x = 0.5
    let width = (delta / 2.0).min(0.2);
    let region = g.select(|x| (x[0] - 0.5).abs() < width / 2.0);
    assert!(region.len() as f64 * g.weight() <= delta / 2.0 + 1e-12);
    let dip = |x: f64| (-(x - 0.5f64).powi(2) / (width * width / 16.0)).exp();
    let v0 = from_fn(&g, |x| {
        let y = x[0].abs();
        x[0].signum() * (0.5 * (PI * y).sin() - 0.6 * dip(y))
    });
    assert!(half.iter().filter(|i| !region.contains(i)).all(|&i| v0[i] >= 0.0));
    let f = Nonlinearity::linear(c.clone(), 0.0);
    let traj = mild_solve(&v0, 1.0, &op, &f, MILD_CAP).unwrap();
    let verdict = verify_small_volume_mp(&traj, &op, &half, &region, &c, 1.0, &params, 1e-3).unwrap();
    assert!(verdict.holds, "{verdict:?}");
    assert!(verdict.measured_rate >= 1.0);

    // nonnegative data: vacuous
    let pos = from_fn(&g, |x| x[0].signum() * (PI * x[0].abs()).sin());
    let traj = mild_solve(&pos, 0.5, &op, &f, 100).unwrap();
    assert!(verify_small_volume_mp(&traj, &op, &half, &region, &c, 1.0, &params, 1e-3).unwrap().holds);

    // a region far above delta is reported as unmet precondition
    let big = g.select(|x| x[0] > 0.0);
    assert!(matches!(
        verify_small_volume_mp(&traj, &op, &half, &big, &c, 1.0, &params, 1e-3),
        Err(Error::PreconditionUnmet(_))
    ));
}

#[test]
fn harnack_quotient_examples() {
    let (d, g) = interval(1.0 / 64.0);
    let op = operator(&d, &g, 0.5);
    let dset = g.select(|x| x[0].abs() < 0.2);
    let uset = g.select(|x| x[0].abs() < 0.8);
    let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.05).collect();
    let constant = synthetic(times, vec![vec![2.0; g.len()]; 41]);
    let rep = harnack_quotient(&constant, &g, &dset, &uset, 0.0, 0.5, 0.1).unwrap();
    assert!((rep.quotient - 1.0).abs() < 1e-15);
    assert!(matches!(harnack_quotient(&constant, &g, &dset, &uset, 0.0, 0.5, 0.2), Err(Error::GeometryViolation(_))));

    let stepper = ImexStepper::new(&op, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut qs = Vec::new();
    for _ in 0..10 {
        let c = rng.random_range(-0.5..0.5);
        let w = rng.random_range(0.1..0.4);
        let u0 = from_fn(&g, |x| (-(x[0] - c).powi(2) / (w * w)).exp() + 0.05);
        let traj = stepper.run(&u0, 0.0, 200, 5, &Nonlinearity::zero()).unwrap();
        let rep = harnack_quotient(&traj, &g, &dset, &uset, 0.0, 0.5, 0.1).unwrap();
        assert!(rep.quotient > 0.0 && rep.quotient <= 1.0);
        qs.push(rep.quotient);
    }
    let (lo, hi) = (qs.iter().copied().fold(f64::INFINITY, f64::min), qs.iter().copied().fold(0.0, f64::max));
    assert!(hi / lo < 3.0, "{qs:?}");
}

#[test]
fn subsolution_bound_synthetic() {
    let (_, g) = interval(1.0 / 64.0);
    let s = 0.5;
    let rho = 0.25;
    let x0 = [0.5, 0.0];
    let eig = principal_eigenpair(rho, 1, 1.0 / 256.0).unwrap();
    let profile = bessel_profile(s, eig.lambda1, &[]).unwrap();
    let k = subsolution_constants(s, 2.0, &eig, &profile).unwrap();
    let sigma1 = 1.0;
    let sigma0 = sigma1 / k.q;
    let half = g.select(|x| x[0] > 0.0);
    let times: Vec<f64> = (0..=20).map(|j| j as f64 * 0.05).collect();
    let make = |scale: f64| {
        synthetic(
            times.clone(),
            times
                .iter()
                .map(|t| {
                    from_fn(&g, |x| {
                        let y = x[0].abs();
                        x[0].signum() * scale * sigma1 * (-k.gamma * t).exp() * eig.eval(&[y - x0[0], 0.0])
                    })
                })
                .collect(),
        )
    };
    let v = verify_subsolution_bound(&make(2.0), &g, &half, x0, sigma0, sigma1, k.gamma, k.q, &eig).unwrap();
    assert!(v.holds);
    assert!((v.min_ratio - 2.0).abs() < 1e-9);
    let err = verify_subsolution_bound(&make(0.5), &g, &half, x0, sigma0, sigma1, k.gamma, k.q, &eig).unwrap_err();
    assert!(matches!(err, Error::PreconditionUnmet(ref m) if m.starts_with("(iv)")));
    let err = verify_subsolution_bound(&make(2.0), &g, &half, x0, 2.0 * sigma0 * k.q, sigma1, k.gamma, k.q, &eig).unwrap_err();
    assert!(matches!(err, Error::PreconditionUnmet(ref m) if m.starts_with("sigma1")));
}

#[test]
fn boundary_growth_examples() {
    let (d, g) = interval(1.0 / 256.0);
    let t = |u: Vec<f64>| synthetic(vec![0.0, 1.0], vec![u.clone(), u]);
    let u = from_fn(&g, |x| (1.0 - x[0] * x[0]).sqrt());
    let b = boundary_growth(&t(u), &g, &d, 0.5, 0.0);
    assert!((b.sup - 2f64.sqrt()).abs() < 1e-3);
    assert_eq!(boundary_growth(&t(vec![0.0; g.len()]), &g, &d, 0.5, 0.0).sup, 0.0);
    let ind = |h: f64| {
        let (d, g) = interval(h);
        boundary_growth(&t(vec![1.0; g.len()]), &g, &d, 0.5, 0.0).sup
    };
    assert!(divergent_under_refinement(ind(1.0 / 64.0), ind(1.0 / 128.0), 0.1));
}

#[test]
fn holder_quotient_examples() {
    let single = |h: f64, f: &dyn Fn(f64) -> f64, alpha: f64| {
        let (_, g) = interval(h);
        let u = from_fn(&g, |x| f(x[0]));
        let region = g.select(|x| x[0].abs() <= 0.5);
        holder_seminorm(&synthetic(vec![1.0, 1.5], vec![u.clone(), u]), &g, &region, alpha, 0.5, (1.0, 2.0)).unwrap()
    };
    assert_eq!(single(1.0 / 32.0, &|_| 3.0, 0.5), 0.0);
    let lin = single(1.0 / 32.0, &|x| x, 0.5);
    assert!(lin.is_finite() && lin <= 1.0 + 1e-12);
    let root = |x: f64| x.abs().sqrt();
    let a = single(1.0 / 64.0, &root, 0.5);
    let b = single(1.0 / 128.0, &root, 0.5);
    // sqrt|x| is 1/2-Holder with constant 1: bounded, slowly approaching 1
    assert!(a <= 1.0 && b <= 1.0);
    assert!(!divergent_under_refinement(a, b, 0.05));
    // exponent above 1/2: the quotient grows like h^{-1/10}, a factor 1.07 per halving
    let a = single(1.0 / 64.0, &root, 0.6);
    let b = single(1.0 / 128.0, &root, 0.6);
    assert!(divergent_under_refinement(a, b, 0.05));
}

#[test]
fn alternative_and_left_continuity() {
    let (_, g) = interval(1.0 / 64.0);
    let z = from_fn(&g, |x| (PI * x[0] / 2.0).cos());
    assert_eq!(positivity_alternative(&z, &g, 0.25, 1e-8).unwrap(), Alternative::Positive);
    assert_eq!(positivity_alternative(&z, &g, 0.0, 1e-8).unwrap(), Alternative::Zero);
    let bad = from_fn(&g, |x| (PI * x[0] / 2.0).cos() * (1.0 + 0.5 * (6.0 * x[0]).sin()));
    assert_eq!(positivity_alternative(&bad, &g, 0.1, 1e-8).unwrap(), Alternative::Mixed);
    let jumps = left_continuity_probe(&z, &g, 0.5, 0.1, 6).unwrap();
    // jumps are O(eps + h) for a continuous profile
    assert!(jumps.iter().all(|j| *j < 0.02));
    assert!(jumps[jumps.len() - 1] < 0.5 * jumps[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lens_is_monotone(dim in 1usize..=2, r in 0.1f64..2.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (d1, d2) = (2.0 * r * a.min(b), 2.0 * r * a.max(b));
        prop_assert!(lens_measure(dim, r, d1) >= lens_measure(dim, r, d2) - 1e-12);
    }

    #[test]
    fn decay_rate_recovered(rate in 0.2f64..3.0, amp in 1e-3f64..10.0) {
        let times: Vec<f64> = (0..60).map(|k| k as f64 * 0.1).collect();
        let series: Vec<f64> = times.iter().map(|t| amp * (-rate * t).exp()).collect();
        let (r, _, v) = classify_decay(&times, &series, &DecayConfig::default()).unwrap();
        prop_assert!((r - rate).abs() < 1e-6 * rate.max(1.0));
        prop_assert_eq!(v, Verdict::Holds);
    }
}
