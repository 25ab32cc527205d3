use super::*;
use crate::cones::{in_good_region, Flavor};
use crate::curves::leaf::grow_leaf_segment;
use crate::rng::{random_point, stream};

#[test]
fn fraction_at_large_n_matches_equidistribution() {
    let p = MapParams::standard(100.0).unwrap();
    let m = random_point(&mut stream(70, 0), p.bits);
    let r = good_fraction(&p, &m, 1.0, 1, 4000, 3).unwrap();
    assert!((r.expected - 0.6802).abs() < 1e-4);
    assert!((r.fraction - r.expected).abs() < 0.05, "{}", r.fraction);
    assert!(r.lower_bound_vacuous);
}

#[test]
fn fraction_at_small_n() {
    let p = MapParams::standard(8.0).unwrap();
    let m = random_point(&mut stream(71, 0), p.bits);
    let r = good_fraction(&p, &m, 1.0, 1, 2000, 4).unwrap();
    assert!(r.fraction >= r.expected - 0.1, "{} {}", r.fraction, r.expected);
}

#[test]
fn short_image_is_rejected() {
    let p = MapParams::standard(8.0).unwrap();
    let m = random_point(&mut stream(72, 0), p.bits);
    assert!(matches!(good_fraction(&p, &m, 1.0, 0, 10, 0), Err(LabError::PreconditionViolated(_))));
}

fn resimulate(p: &MapParams, g: &GoodPoint) -> Vec<bool> {
    let hp = p.with_bits(g.bits).unwrap();
    let flavor = match g.flavor {
        Bundle::Uu => Flavor::U,
        Bundle::Ss => Flavor::S,
    };
    let mut q = g.point.clone();
    let mut out = vec![];
    for k in 0..=g.horizon {
        if k > 0 {
            q = hp.step(&q, g.flavor.growth());
        }
        out.push(in_good_region(p.n, &q.to_f64(), flavor));
    }
    out
}

#[test]
fn good_point_stays_good() {
    let p = MapParams::standard(8.0).unwrap();
    let m = random_point(&mut stream(73, 0), p.bits);
    let seg = grow_leaf_segment(&p, &m, Bundle::Uu, 1.0, 3).unwrap();
    let g = persistent_good_point(&p, &seg.anchor, seg.flavor, seg.radius, 30).unwrap();
    let flags = resimulate(&p, &g);
    assert!(flags[g.first_good as usize..].iter().all(|f| *f));
    assert!(g.min_margin >= 0.0);
    assert!(g.offset <= 1.0);
}

#[test]
fn good_point_backward() {
    let p = MapParams::standard(8.0).unwrap();
    let m = random_point(&mut stream(74, 0), p.bits);
    let g = persistent_good_point(&p, &m, Bundle::Ss, 0.5, 25).unwrap();
    let flags = resimulate(&p, &g);
    assert!(flags[g.first_good as usize..].iter().all(|f| *f));
}

#[test]
fn good_anchor_can_start_at_zero() {
    let p = MapParams::standard(8.0).unwrap();
    let m = TorusPoint::from_angles([0.0, 1.0, 2.0, 3.0], p.bits).unwrap();
    let g = persistent_good_point(&p, &m, Bundle::Uu, 0.5, 20).unwrap();
    assert_eq!(g.first_good, 0);
    assert!(resimulate(&p, &g).iter().all(|f| *f));
}

#[test]
fn good_point_never_fails_on_random_seeds() {
    let p = MapParams::standard(8.0).unwrap();
    for i in 0..100 {
        let m = random_point(&mut stream(75, i), p.bits);
        let g = persistent_good_point(&p, &m, Bundle::Uu, 0.5, 30).unwrap();
        assert!(g.first_good <= 2, "{i}: {}", g.first_good);
    }
}

#[test]
fn good_point_at_large_n() {
    let p = MapParams::standard(150.0).unwrap();
    let m = random_point(&mut stream(76, 0), p.bits);
    let g = persistent_good_point(&p, &m, Bundle::Uu, 0.1, 20).unwrap();
    assert!(resimulate(&p, &g)[g.first_good as usize..].iter().all(|f| *f));
}
