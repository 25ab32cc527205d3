use super::*;
use nalgebra::Matrix2;
use crate::real::Dd;
use crate::rng::{random_point, stream};
use crate::torus::BasePoint;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

fn worked_point(bits: u32) -> TorusPoint<f64> {
    TorusPoint::new(0.0, 0.0, BasePoint::from_fractions(0.25, 0.0, bits))
}

#[test]
fn standard_map_examples() {
    assert_eq!(standard_map(10.0, 0.0, 0.0).unwrap(), (0.0, 0.0));
    let (x, y) = standard_map(10.0, PI, PI).unwrap();
    assert_abs_diff_eq!(x, PI, epsilon = 1e-12);
    assert_eq!(y, PI);
    let (x, y) = standard_map(10.0, FRAC_PI_2, 0.0).unwrap();
    assert_abs_diff_eq!(x, 4.2920, epsilon = 1e-4);
    assert_abs_diff_eq!(y, std::f64::consts::FRAC_PI_2, epsilon = 1e-4);
    assert!(standard_map(10.0, f64::NAN, 0.0).is_err());
}

#[test]
fn forward_fixed_points() {
    for n in [1.0, 7.5, 100.0] {
        let p = MapParams::standard(n).unwrap();
        let o = TorusPoint::new(0.0, 0.0, BasePoint::zero(p.bits));
        assert_eq!(p.forward(&o), o);
        let q = TorusPoint::new(PI, PI, BasePoint::zero(p.bits));
        let fq = p.forward(&q);
        assert_abs_diff_eq!(fq.fiber.x, PI, epsilon = 1e-12);
        assert_eq!(fq.base, q.base);
    }
}

#[test]
fn worked_example_forward_and_back() {
    let p = MapParams::standard(1.0).unwrap();
    let m = worked_point(p.bits);
    let f = p.forward(&m);
    assert_abs_diff_eq!(f.fiber.x, PI, epsilon = 1e-15);
    assert_eq!(f.fiber.y, 0.0);
    assert_eq!(f.base, BasePoint::from_fractions(0.25, 0.75, p.bits));
    let a = f.angles();
    assert_abs_diff_eq!(a[2], FRAC_PI_2, epsilon = 1e-15);
    assert_abs_diff_eq!(a[3], 3.0 * FRAC_PI_2, epsilon = 1e-15);
    let back = p.inverse(&f);
    assert_eq!(back.base, m.base);
    assert!(torus_dist(&back, &m) < 1e-15);
    assert!(p.involution_defect(&f) < 1e-12);
}

#[test]
fn inverse_roundtrip_random() {
    let p = MapParams::standard(10.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let m = random_point(&mut stream(3, i), p.bits);
        let r = p.forward(&p.inverse(&m));
        assert_eq!(r.base, m.base);
        worst = worst.max(torus_dist(&r, &m));
        worst = worst.max(torus_dist(&p.inverse(&p.forward(&m)), &m));
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn base_roundtrip_is_exact_over_long_orbits() {
    let p = MapParams::standard(10.0).unwrap();
    let b = BasePoint::from_fractions(1.0 / 3.0, 1.0 / 7.0, p.bits);
    let mut m = TorusPoint::new(0.3, 0.2, b.clone());
    for _ in 0..200 {
        m = p.forward(&m);
    }
    for _ in 0..200 {
        m = p.inverse(&m);
    }
    assert_eq!(m.base, b);
}

#[test]
fn derivative_blocks() {
    let p = MapParams::standard(100.0).unwrap();
    let m = TorusPoint::new(0.0, 0.0, BasePoint::zero(p.bits));
    let j = p.derivative(&m, Direction::Forward);
    assert_eq!(j.block.ds, [[202.0, -1.0], [1.0, 0.0]]);
    assert_eq!(j.block.b[1], [0.0, 0.0]);
    let an = HyperbolicMatrix::cat_map().int().pow(100).to_f64();
    assert_eq!(j.block.b[0], an[0]);
}

#[test]
fn determinant_from_blocks() {
    let p = MapParams::standard(20.0).unwrap();
    for i in 0..1000 {
        let m = random_point(&mut stream(4, i), p.bits);
        assert!((p.derivative(&m, Direction::Forward).det() - 1.0).abs() < 1e-9);
    }
    let p = MapParams::standard(200.0).unwrap();
    let m = random_point(&mut stream(4, 0), p.bits);
    assert!((p.derivative(&m, Direction::Forward).det() - 1.0).abs() < 1e-6);
}

fn componentwise_residual(b: &Matrix4<f64>, f: &Matrix4<f64>) -> f64 {
    let prod = b * f;
    let scale = b.abs() * f.abs();
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[(i, j)] - id).abs() / scale[(i, j)].max(1.0));
        }
    }
    worst
}

#[test]
fn backward_derivative_inverts_forward() {
    for eps in [0.0, 1e-3] {
        let p = perturb(&MapParams::standard(20.0).unwrap(), eps, 7).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let m = random_point(&mut stream(5, i), p.bits);
            let jf = p.derivative(&m, Direction::Forward);
            let jb = p.derivative(&p.forward(&m), Direction::Backward);
            worst = worst.max(componentwise_residual(&jb.ambient(), &jf.ambient()));
            let sf = p.split_jacobian(&jf);
            let sb = p.split_jacobian(&jb);
            worst = worst.max(componentwise_residual(&sb, &sf));
        }
        assert!(worst < 1e-8, "eps={eps} residual {worst}");
    }
}

#[test]
fn split_jacobian_matches_ambient_at_small_n() {
    let p = perturb(&MapParams::standard(3.0).unwrap(), 1e-3, 2).unwrap();
    let h = &p.matrix;
    let mut t = Matrix4::identity();
    let b = h.basis();
    for i in 0..2 {
        for j in 0..2 {
            t[(2 + i, 2 + j)] = b[i][j];
        }
    }
    let ti = t.try_inverse().unwrap();
    for i in 0..50 {
        let m = random_point(&mut stream(6, i), p.bits);
        for dir in [Direction::Forward, Direction::Backward] {
            let j = p.derivative(&m, dir);
            let want = ti * j.ambient() * t;
            let got = p.split_jacobian(&j);
            assert!((want - got).norm() < 1e-9 * want.norm(), "{dir:?}");
        }
    }
}

#[test]
fn involution_defect_small() {
    for n in [5.0, 10.0, 20.0] {
        let p = MapParams::standard(n).unwrap();
        let o = TorusPoint::new(0.0, 0.0, BasePoint::zero(p.bits));
        assert_eq!(p.involution_defect(&o), 0.0);
        for i in 0..200 {
            let m = random_point(&mut stream(8, i), p.bits);
            assert!(p.involution_defect(&m) < 1e-9);
        }
    }
}

#[test]
fn perturbation_zero_is_identity() {
    let p = MapParams::standard(10.0).unwrap();
    let q = perturb(&p, 0.0, 1).unwrap();
    let m = random_point(&mut stream(9, 0), p.bits);
    assert_eq!(p.forward(&m), q.forward(&m));
    assert!(perturb(&p, 0.2, 1).is_err());
    assert!(perturb(&p, f64::NAN, 1).is_err());
}

#[test]
fn perturbed_roundtrip_and_volume() {
    let p = perturb(&MapParams::standard(10.0).unwrap(), 1e-2, 7).unwrap();
    let c1 = p.perturbation.as_ref().unwrap().c1_distance;
    assert!((5e-3..=1e-2).contains(&c1));
    for i in 0..300 {
        let m = random_point(&mut stream(10, i), p.bits);
        let r = p.inverse(&p.forward(&m));
        assert_eq!(r.base, m.base);
        assert!(torus_dist(&r, &m) < 1e-9);
        assert!((p.derivative(&m, Direction::Forward).det() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn perturbation_seed_seven_c1_window() {
    let p = perturb(&MapParams::standard(10.0).unwrap(), 1e-3, 7).unwrap();
    let c1 = p.perturbation.unwrap().c1_distance;
    assert!((5e-4..=1e-3).contains(&c1), "{c1}");
}

#[test]
fn rejects_bad_parameters() {
    assert!(MapParams::standard(0.5).is_err());
    assert!(MapParams::standard(301.0).is_err());
    assert!(MapParams::new(10.0, [[1, 1], [1, 0]], 512).is_err());
    assert!(MapParams::new(10.0, [[2, 1], [1, 1]], 64).is_err());
}

#[test]
fn ds_norm_bounds() {
    for n in [10.0, 100.0] {
        let p = MapParams::standard(n).unwrap();
        for i in 0..500 {
            let x = TAU * i as f64 / 500.0;
            let m = TorusPoint::new(x, 0.0, BasePoint::zero(p.bits));
            let d = p.derivative(&m, Direction::Forward).block.ds;
            let nrm = Matrix2::new(d[0][0], d[0][1], d[1][0], d[1][1]).norm();
            let sup = ((2.0 * n + 2.0).powi(2) + 2.0).sqrt();
            assert!(nrm >= 1.0 / (2.0 * n) && nrm <= sup + 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn skew_structure(x1 in 0.0f64..TAU, y1 in 0.0f64..TAU, x2 in 0.0f64..TAU, y2 in 0.0f64..TAU, fu in 0.0f64..1.0, fv in 0.0f64..1.0) {
        let p = MapParams::standard(12.5).unwrap();
        let b = BasePoint::from_fractions(fu, fv, p.bits);
        let a = p.forward(&TorusPoint::new(x1, y1, b.clone()));
        let c = p.forward(&TorusPoint::new(x2, y2, b));
        prop_assert_eq!(a.base, c.base);
    }

    #[test]
    fn dd_and_f64_agree_for_one_step(x in 0.0f64..TAU, y in 0.0f64..TAU, fu in 0.0f64..1.0, fv in 0.0f64..1.0) {
        let p = MapParams::standard(8.0).unwrap();
        let m = TorusPoint::new(x, y, BasePoint::from_fractions(fu, fv, p.bits));
        let a = p.forward(&m);
        let b = p.forward(&m.to_dd()).to_f64();
        prop_assert!(torus_dist(&a, &b) < 1e-12);
    }
}


#[test]
fn multiprecision_orbit_tracks_double_double() {
    use crate::mp::Mp;
    let p = MapParams::standard(8.0).unwrap();
    let m = random_point(&mut stream(12, 0), p.bits);
    let t = std::time::Instant::now();
    let mut a = m.cast::<Mp>();
    let mut b = m.to_dd();
    for k in 0..20 {
        a = p.forward(&a);
        b = p.forward(&b);
        let d = torus_dist(&a.cast::<Dd>(), &b).hi();
        // double-double error grows at the center exponent
        assert!(d < 1e-30 * 30f64.powi(k + 1), "{k} {d}");
    }
    let back = p.iterate(&a, Direction::Backward, 20);
    assert!(torus_dist(&back.cast::<Dd>(), &m.to_dd()).hi() < 1e-80);
    eprintln!("mp 40 steps: {:?}", t.elapsed());
}

#[test]
fn perturbed_derivative_matches_differences() {
    let p = perturb(&MapParams::standard(8.0).unwrap(), 1e-3, 3).unwrap();
    let m = TorusPoint::new(1.1, 2.3, BasePoint::from_fractions(0.31, 0.77, p.bits));
    let j = p.derivative(&m, Direction::Forward).ambient();
    let fm = p.forward(&m);
    for c in 0..4 {
        let h = if c < 2 { 1e-7 } else { 1e-11 };
        let mut q = m.clone();
        match c {
            0 => q.fiber.x += h,
            1 => q.fiber.y += h,
            _ => {
                let mut d = [0.0, 0.0];
                d[c - 2] = h;
                q.base = q.base.shifted_by(d);
            }
        }
        let fd = p.forward(&q).diff(&fm);
        for r in 0..4 {
            let want = fd[r] / h;
            assert!((j[(r, c)] - want).abs() < 1e-4 * (1.0 + want.abs()), "entry ({r},{c}): {} vs {want}", j[(r, c)]);
        }
    }
}

