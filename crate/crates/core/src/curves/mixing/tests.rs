use std::f64::consts::{PI, TAU};

use super::*;

fn boxes() -> (BoxSet, BoxSet) {
    let b = BoxSet::new([PI; 4], [PI / 2.0; 4]).unwrap();
    (b.clone(), b)
}

fn wavy(horizontal: bool, offset: f64, k: usize) -> Vec<FiberPoint<f64>> {
    (0..=k)
        .map(|i| {
            let s = 2.0 * TAU * i as f64 / k as f64;
            let w = offset + 0.05 * (3.0 * s).sin();
            if horizontal {
                FiberPoint::new(s, w).reduced()
            } else {
                FiberPoint::new(w, s).reduced()
            }
        })
        .collect()
}

#[test]
fn transverse_wrapped_curves_cross_four_times() {
    // two turns each way: intersection number 2 * 2
    let a = wavy(true, 0.3, 400);
    let b = wavy(false, 1.0, 400);
    let found = polyline_crossings(&a, &b);
    assert_eq!(found.len(), 4);
    for c in &found {
        assert!(!c.tie);
        assert!((c.point.x - 1.0).abs() < 0.06 && (c.point.y - 0.3).abs() < 0.06, "{:?}", c.point);
    }
}

#[test]
fn shared_vertex_is_reported_once_as_a_tie() {
    let a = [FiberPoint::new(0.0, 1.0), FiberPoint::new(1.0, 1.0), FiberPoint::new(2.0, 1.0)];
    let b = [FiberPoint::new(1.0, 0.0), FiberPoint::new(1.0, 1.0), FiberPoint::new(1.0, 2.0)];
    let found = polyline_crossings(&a, &b);
    assert_eq!(found.len(), 1);
    assert!(found[0].tie);
    assert!((found[0].point.x - 1.0).abs() < 1e-12 && (found[0].point.y - 1.0).abs() < 1e-12);
}

#[test]
fn parallel_curves_do_not_cross() {
    let a = wavy(true, 0.3, 200);
    let b = wavy(true, 2.0, 200);
    assert!(polyline_crossings(&a, &b).is_empty());
}

#[test]
fn unperturbed_orbits_land_in_both_boxes() {
    let (u, v) = boxes();
    let p = MapParams::standard(8.0).unwrap();
    let mut s = MixingSetup::new(&p, &u, &v, 4, MixingConfig::default()).unwrap();
    let n0 = s.first_time().unwrap();
    for n in [n0, n0 + 2] {
        let o = s.orbit(n).unwrap();
        assert!(o.verified, "n = {n}");
        assert!(o.source_margin > 0.0 && o.target_margin > 0.0);
        assert!(o.source_residual < 1e-3 && o.target_residual < 1e-3);
        assert!(o.newton_residual < 1e-40);
        assert!(o.tube.is_none());
    }
}

#[test]
fn perturbed_orbit_stays_in_the_tube() {
    let (u, v) = boxes();
    let p = crate::perturb(&MapParams::standard(8.0).unwrap(), 1e-3, 1).unwrap();
    let o = mixing_intersection(&p, &u, &v, 4, MixingConfig::default()).unwrap();
    assert!(o.verified);
    let tube = o.tube.unwrap();
    assert!(tube.within && tube.deviation > 0.0 && tube.deviation < tube.width);
    assert!(o.target_residual < 1e-3);
}

#[test]
fn saturation_discs_return_to_the_source() {
    let (u, v) = boxes();
    let cfg = MixingConfig { saturation_samples: 20, ..MixingConfig::default() };
    let s = MixingSetup::new(&MapParams::standard(8.0).unwrap(), &u, &v, 2, cfg).unwrap();
    let r = s.saturation(HETEROCLINIC_RADIUS).unwrap();
    assert!(r.pass, "{r:?}");
    assert_eq!(r.inside, 20);
}

proptest::proptest! {
    #[test]
    fn crossing_count_is_topological(oy in 0.0f64..TAU, ox in 0.0f64..TAU, k in 50usize..300) {
        let found = polyline_crossings(&wavy(true, oy, k), &wavy(false, ox, k + 7));
        proptest::prop_assert_eq!(found.len(), 4);
    }
}
