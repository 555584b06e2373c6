use fracplane_core::geometry::*;
use fracplane_core::Error;
use proptest::prelude::*;

fn all(grid: &Grid) -> Vec<usize> {
    (0..grid.len()).collect()
}

#[test]
fn disk_cap_area_converges() {
    let exact = 0.5f64.acos() - 0.5 * 0.75f64.sqrt();
    let mut errs = Vec::new();
    for h in [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0] {
        let d = Domain::disk(1.0).unwrap();
        let g = Grid::new(&d, h).unwrap();
        let cap = cap_region(&g, 0.5).unwrap();
        assert_eq!(cap.components.len(), 1);
        errs.push((cap.cells.len() as f64 * g.weight() - exact).abs());
    }
    assert!(errs[2] < 5e-3, "{errs:?}");
    assert!(errs[2] < errs[0]);
}

#[test]
fn near_boundary_cap() {
    let d = Domain::interval(1.0).unwrap();
    let g = Grid::new(&d, 0.01).unwrap();
    // last center sits at 0.995
    let cap = cap_region(&g, 0.99).unwrap();
    assert_eq!(cap.cells.len(), 1);
    assert!(matches!(cap_region(&g, 0.999), Err(Error::EmptyCap { .. })));
}

#[test]
fn unit_interval_metrics() {
    let d = Domain::union(1, vec![Aabb { lo: [0.0, 0.0], hi: [1.0, 0.0] }]).unwrap();
    let g = Grid::new(&d, 0.01).unwrap();
    let m = region_metrics(&all(&g), &g).unwrap();
    assert!((m.measure - 1.0).abs() <= 0.01);
    assert!((m.diameter - 1.0).abs() <= 0.011);
    assert!((m.inradius - 0.5).abs() <= 0.01);
}

#[test]
fn smaller_component_governs_inradius() {
    let d = Domain::union(
        1,
        vec![Aabb { lo: [0.0, 0.0], hi: [0.2, 0.0] }, Aabb { lo: [0.6, 0.0], hi: [1.0, 0.0] }],
    )
    .unwrap();
    let g = Grid::new(&d, 0.01).unwrap();
    let cells = all(&g);
    assert_eq!(components(&g, &cells).len(), 2);
    let m = region_metrics(&cells, &g).unwrap();
    assert!((m.inradius - 0.1).abs() <= 0.01, "{}", m.inradius);
    assert!((m.diameter - 1.0).abs() <= 0.011);
}

#[test]
fn disk_metrics() {
    let d = Domain::disk(1.0).unwrap();
    let g = Grid::new(&d, 1.0 / 64.0).unwrap();
    let m = region_metrics(&all(&g), &g).unwrap();
    assert!((m.diameter - 2.0).abs() < 0.05);
    assert!((m.inradius - 1.0).abs() < 0.05);
    assert!((m.measure - std::f64::consts::PI).abs() < 0.05);
    assert!(matches!(region_metrics(&[], &g), Err(Error::EmptyRegion)));
}

#[test]
fn builtin_domains_are_reflection_invariant() {
    let domains = [Domain::interval(1.0).unwrap(), Domain::rectangle(1.0, 0.5).unwrap(), Domain::disk(1.0).unwrap()];
    for d in &domains {
        for h in [1.0 / 16.0, 1.0 / 40.0] {
            let g = Grid::new(d, h).unwrap();
            d.check_d1(&g).unwrap();
            for i in 0..g.len() {
                let j = g.mirror(i, 0.0).expect("mirror cell");
                assert_eq!(g.mirror(j, 0.0), Some(i));
            }
        }
    }
}

#[test]
fn cap_measure_decreases_to_zero() {
    let d = Domain::disk(1.0).unwrap();
    let g = Grid::new(&d, 1.0 / 64.0).unwrap();
    let mut prev = f64::INFINITY;
    let mut last = 0.0;
    for k in 0..64 {
        let lambda = k as f64 / 64.0;
        let Ok(cap) = cap_region(&g, lambda) else { break };
        let m = cap.cells.len() as f64 * g.weight();
        assert!(m <= prev);
        prev = m;
        last = m;
    }
    assert!(last < 1e-2);
}

#[test]
fn invalid_extents_rejected() {
    assert!(Domain::interval(0.0).is_err());
    assert!(Domain::disk(f64::NAN).is_err());
    assert!(Domain::rectangle(1.0, -1.0).is_err());
}

fn point() -> impl Strategy<Value = Point> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| [a, b])
}

proptest! {
    #[test]
    fn reflection_is_an_isometric_involution(x in point(), y in point(), lam in -2.0..2.0f64) {
        let rx = reflect(&x, lam);
        let back = reflect(&rx, lam);
        prop_assert!((back[0] - x[0]).abs() < 1e-12 && back[1] == x[1]);
        let d0 = (x[0] - y[0]).hypot(x[1] - y[1]);
        let ry = reflect(&y, lam);
        let d1 = (rx[0] - ry[0]).hypot(rx[1] - ry[1]);
        prop_assert!((d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn caps_are_nested(a in -1.0..0.98f64, b in -1.0..0.98f64, r in 0.5..1.5f64) {
        let d = Domain::disk(r).unwrap();
        let g = Grid::new(&d, r / 16.0).unwrap();
        let (lo, hi) = (a.min(b) * r, a.max(b) * r);
        if let Ok(small) = cap_region(&g, hi) {
            let big = cap_region(&g, lo).unwrap();
            prop_assert!(small.cells.iter().all(|c| big.cells.contains(c)));
            prop_assert!(small.cells.iter().all(|&c| g.center(c)[0] > hi));
        }
    }

    #[test]
    fn interior_centres_have_positive_distance(h in 0.01..0.3f64, a in 0.2..2.0f64, b in 0.2..2.0f64) {
        let d = Domain::rectangle(a, b).unwrap();
        let g = Grid::new(&d, h).unwrap();
        for c in g.centers() {
            prop_assert!(d.contains(c));
            prop_assert!(d.boundary_distance(c) > 0.0);
        }
    }
}
