use super::*;
use crate::cones::{cone_contains, ConeKind, ConeSpec};
use crate::skew::perturb;
use crate::torus::BasePoint;

fn origin(p: &MapParams) -> TorusPoint<f64> {
    TorusPoint::new(0.0, 0.0, BasePoint::zero(p.bits))
}

/// Dominant eigenvector of a fixed matrix by plain power iteration.
fn power_iteration(a: &Matrix4<f64>) -> [f64; 4] {
    let mut v = Vector4::new(0.3, -0.7, 0.5, 0.2);
    for _ in 0..200 {
        v = a * v;
        v /= v.norm();
    }
    [v[0], v[1], v[2], v[3]]
}

#[test]
fn unstable_direction_at_fixed_point_matches_power_iteration() {
    for n in [2.0, 5.0] {
        let p = MapParams::standard(n).unwrap();
        let o = origin(&p);
        let est = invariant_direction(&p, &o, Bundle::Uu, 80).unwrap();
        let j = p.derivative(&o, Direction::Forward).ambient();
        let want = power_iteration(&j);
        assert!(line_angle(&est.vector, &want) < 1e-10, "N={n}");
        let jb = p.derivative(&o, Direction::Backward).ambient();
        let ss = invariant_direction(&p, &o, Bundle::Ss, 80).unwrap();
        assert!(line_angle(&ss.vector, &power_iteration(&jb)) < 1e-10, "N={n}");
    }
}

#[test]
fn estimates_are_unit_and_in_cones() {
    for n in [5.0, 20.0, 300.0] {
        let p = MapParams::standard(n).unwrap();
        let hm = &p.matrix;
        for i in 0..20 {
            let m = random_point(&mut stream(1, i), p.bits);
            let uu = invariant_direction(&p, &m, Bundle::Uu, 12).unwrap();
            let ss = invariant_direction(&p, &m, Bundle::Ss, 12).unwrap();
            for e in [&uu, &ss] {
                let nrm: f64 = e.vector.iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((nrm - 1.0).abs() < 1e-12);
                assert!(e.convergence_gap < GAP_TOL);
            }
            let cu = ConeSpec { kind: ConeKind::Unstable, size: 0.1 };
            let cs = ConeSpec { kind: ConeKind::Stable, size: 0.1 };
            assert!(cone_contains(hm, cu, uu.vector).unwrap());
            assert!(cone_contains(hm, cs, ss.vector).unwrap());
        }
    }
}

#[test]
fn unconverged_estimate_is_reported() {
    let p = MapParams::standard(1.0).unwrap();
    let m = random_point(&mut stream(2, 0), p.bits);
    match invariant_direction(&p, &m, Bundle::Uu, 2) {
        Err(LabError::NotConverged { gap }) => assert!(gap > GAP_TOL),
        other => panic!("{other:?}"),
    }
    assert!(invariant_direction(&p, &m, Bundle::Uu, 0).is_err());
}

#[test]
fn pinch_bands_hold() {
    for (n, half) in [(10.0, 1.99e-4), (20.0, 2e-8)] {
        let p = MapParams::standard(n).unwrap();
        let r = transversality_check(&p, 200, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.unstable.center - 0.8506508).abs() < 1e-7);
        assert!((r.stable.center - 0.5257311).abs() < 1e-7);
        assert!(r.unstable.max_ratio <= 0.8506508 + half && r.unstable.min_ratio >= 0.8506508 - half);
        assert!(r.min_angle > 1.0);
    }
    assert!(transversality_check(&MapParams::standard(41.0).unwrap(), 10, 0).is_err());
}

#[test]
fn bundle_is_invariant() {
    let p = MapParams::standard(20.0).unwrap();
    for i in 0..100 {
        let m = random_point(&mut stream(4, i), p.bits);
        assert!(invariance_defect(&p, &m).unwrap() < 1e-8);
    }
}

#[test]
fn lyapunov_extremes_and_sum() {
    let p = MapParams::standard(10.0).unwrap();
    let m = random_point(&mut stream(5, 0), p.bits);
    let r = lyapunov_spectrum(&p, &m, 10_000).unwrap();
    let top = 20.0 * ((3.0 + 5f64.sqrt()) / 2.0).ln();
    assert!((r.exponents[0] - top).abs() < 1e-3);
    assert!((r.exponents[3] + top).abs() < 1e-3);
    assert!(r.sum_defect < 1e-6);
    assert!(r.exponents[1] > 0.5 && r.exponents[2] < -0.5);
    assert!(lyapunov_spectrum(&p, &m, 99).is_err());
}

#[test]
fn volume_defects() {
    let p = MapParams::standard(20.0).unwrap();
    assert!(volume_defect(&p, 10_000) < 1e-9);
    let q = perturb(&p, 1e-2, 1).unwrap();
    assert!(volume_defect(&q, 2_000) < 1e-8);
    assert!(volume_defect(&MapParams::standard(200.0).unwrap(), 1_000) < 1e-6);
}

#[test]
fn sequential_and_parallel_agree() {
    let p = MapParams::standard(10.0).unwrap();
    let a = transversality_check_with(Exec::Sequential, &p, 50, 8).unwrap();
    let b = transversality_check_with(Exec::default(), &p, 50, 8).unwrap();
    assert_eq!(a.unstable.max_ratio, b.unstable.max_ratio);
    assert_eq!(a.min_angle, b.min_angle);
}
