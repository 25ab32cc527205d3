//! Critical and good regions, cone families and one-step cone checks.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Vector4;
use rand::Rng;
use serde::Serialize;

use crate::error::LabError;
use crate::par::{map_indices, Exec};
use crate::rng::{random_point, stream};
use crate::skew::{Direction, MapParams};
use crate::torus::{split_vector, HyperbolicMatrix, TorusPoint};

/// Which fiber coordinate the good region constrains: `x` for `U`, `y` for `S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Flavor {
    S,
    U,
}

/// Critical strips of half-width `2 N^{-3/10}` around `pi/2` and `3pi/2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegionSpec {
    pub n: f64,
    pub half_width: f64,
}

impl RegionSpec {
    pub fn new(n: f64) -> Self {
        RegionSpec { n, half_width: 2.0 * n.powf(-0.3) }
    }

    /// Fraction of the circle covered by the two critical strips.
    pub fn excluded_fraction(&self) -> f64 {
        (4.0 * self.half_width / TAU).min(1.0)
    }

    /// Whether the angle lies outside both open strips.
    pub fn is_good(&self, angle: f64) -> bool {
        let d = circular_dist(angle, FRAC_PI_2).min(circular_dist(angle, 3.0 * FRAC_PI_2));
        // the closed good set includes the boundary; allow for rounding of the input
        d >= self.half_width * (1.0 - 4.0 * f64::EPSILON)
    }
}

fn circular_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Membership of `m` in `G^u` (tests `x`) or `G^s` (tests `y`).
pub fn in_good_region(n: f64, m: &TorusPoint<f64>, flavor: Flavor) -> bool {
    let r = RegionSpec::new(n);
    match flavor {
        Flavor::U => r.is_good(m.fiber.x),
        Flavor::S => r.is_good(m.fiber.y),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConeKind {
    Stable,
    Unstable,
    Horizontal,
    Vertical,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub size: f64,
}

impl ConeSpec {
    /// Center cone of the default aperture `N^{-3/5}`.
    pub fn center(kind: ConeKind, n: f64) -> Self {
        ConeSpec { kind, size: n.powf(-0.6) }
    }
}

/// Cone ratio of a vector already in split coordinates `(x, y, s, u)`.
pub fn split_ratio(kind: ConeKind, v: &[f64; 4]) -> f64 {
    let r = match kind {
        ConeKind::Stable => (v[0] * v[0] + v[1] * v[1] + v[3] * v[3]).sqrt() / v[2].abs(),
        ConeKind::Unstable => (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() / v[3].abs(),
        ConeKind::Horizontal => v[1].abs() / v[0].abs(),
        ConeKind::Vertical => v[0].abs() / v[1].abs(),
    };
    if r.is_nan() {
        0.0
    } else {
        r
    }
}

/// Cone ratio of an ambient vector; the vector lies in the cone of size
/// `a` iff the ratio is at most `a`.
pub fn cone_ratio(hm: &HyperbolicMatrix, kind: ConeKind, v: [f64; 4]) -> Result<f64, LabError> {
    if v.iter().all(|c| *c == 0.0) {
        return Err(LabError::ZeroVector);
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(LabError::NonFinite("vector"));
    }
    Ok(split_ratio(kind, &split_vector(hm, v).as_array()))
}

pub fn cone_contains(hm: &HyperbolicMatrix, cone: ConeSpec, v: [f64; 4]) -> Result<bool, LabError> {
    Ok(cone_ratio(hm, cone.kind, v)? <= cone.size)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CenterExpansionReport {
    pub in_cone_after: bool,
    pub growth: f64,
    /// Horizontal cone ratio of the image.
    pub image_ratio: f64,
    /// Set when growth is at most `N^{1/2}` or the image leaves the cone.
    pub violation: bool,
}

/// One application of the derivative to a horizontal vector at a point of `G^u`.
pub fn check_center_expansion(
    params: &MapParams,
    m: &TorusPoint<f64>,
    v: [f64; 4],
) -> Result<CenterExpansionReport, LabError> {
    let theta = params.n.powf(-0.6);
    if !in_good_region(params.n, m, Flavor::U) {
        return Err(LabError::PreconditionViolated(format!("x = {} is not in G^u", m.fiber.x)));
    }
    if v[2] != 0.0 || v[3] != 0.0 {
        return Err(LabError::PreconditionViolated("vector has a base component".into()));
    }
    if cone_ratio(&params.matrix, ConeKind::Horizontal, v)? > theta {
        return Err(LabError::PreconditionViolated("vector outside the horizontal cone".into()));
    }
    let j = params.derivative(m, Direction::Forward).ambient();
    let w = j * Vector4::from(v);
    let growth = w.norm() / Vector4::from(v).norm();
    let image_ratio = split_ratio(ConeKind::Horizontal, &[w[0], w[1], 0.0, 0.0]);
    let in_cone_after = image_ratio <= theta;
    Ok(CenterExpansionReport {
        in_cone_after,
        growth,
        image_ratio,
        violation: growth <= params.n.sqrt() || !in_cone_after,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeSweepReport {
    pub kind: ConeKind,
    pub alpha: f64,
    pub n_samples: usize,
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Random points and random boundary vectors of an su-cone; the unstable
/// cone is pushed forward, the stable cone backward.
pub fn cone_invariance_sweep(
    params: &MapParams,
    cone: ConeSpec,
    n_samples: usize,
    seed: u64,
) -> Result<ConeSweepReport, LabError> {
    cone_invariance_sweep_with(Exec::default(), params, cone, n_samples, seed)
}

pub fn cone_invariance_sweep_with(
    exec: Exec,
    params: &MapParams,
    cone: ConeSpec,
    n_samples: usize,
    seed: u64,
) -> Result<ConeSweepReport, LabError> {
    if n_samples == 0 {
        return Err(LabError::InvalidParameter("n_samples must be positive".into()));
    }
    let (dir, lead) = match cone.kind {
        ConeKind::Unstable => (Direction::Forward, 3),
        ConeKind::Stable => (Direction::Backward, 2),
        _ => return Err(LabError::InvalidParameter("sweep applies to stable or unstable cones".into())),
    };
    let alpha = cone.size;
    let ratios = map_indices(exec, n_samples, |i| {
        let mut rng = stream(seed, i as u64);
        let m = random_point(&mut rng, params.bits);
        let mut v = [0.0; 4];
        let mut rest = [0.0; 3];
        loop {
            for r in rest.iter_mut() {
                *r = rng.gen_range(-1.0..1.0);
            }
            let q: f64 = rest.iter().map(|r| r * r).sum();
            if q > 1e-6 && q <= 1.0 {
                let s = alpha / q.sqrt();
                rest.iter_mut().for_each(|r| *r *= s);
                break;
            }
        }
        let mut k = 0;
        for (idx, c) in v.iter_mut().enumerate() {
            if idx == lead {
                *c = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            } else {
                *c = rest[k];
                k += 1;
            }
        }
        let j = params.split_jacobian(&params.derivative(&m, dir));
        let w = j * Vector4::from(v);
        split_ratio(cone.kind, &[w[0], w[1], w[2], w[3]])
    });
    let worst_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ConeSweepReport {
        kind: cone.kind,
        alpha,
        n_samples,
        worst_ratio,
        pass: ratios.iter().all(|r| *r < alpha),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionSweepReport {
    pub n_samples: usize,
    pub violations: usize,
    pub min_growth: f64,
    pub growth_bound: f64,
    pub worst_image_ratio: f64,
    pub theta: f64,
    pub pass: bool,
}

/// Samples `(m, v)` with `m` in `G^u` and `v` in the horizontal cone
/// (including its boundary) and counts expansion or cone violations.
pub fn center_expansion_sweep(params: &MapParams, n_samples: usize, seed: u64) -> ExpansionSweepReport {
    center_expansion_sweep_with(Exec::default(), params, n_samples, seed)
}

pub fn center_expansion_sweep_with(
    exec: Exec,
    params: &MapParams,
    n_samples: usize,
    seed: u64,
) -> ExpansionSweepReport {
    let theta = params.n.powf(-0.6);
    let region = RegionSpec::new(params.n);
    let reports = map_indices(exec, n_samples, |i| {
        let mut rng = stream(seed, i as u64);
        let mut m = random_point(&mut rng, params.bits);
        while !region.is_good(m.fiber.x) {
            m.fiber.x = rng.gen::<f64>() * TAU;
        }
        // every eighth sample sits on the good-region boundary
        if i % 8 == 0 {
            let c = if rng.gen::<bool>() { FRAC_PI_2 } else { 3.0 * FRAC_PI_2 };
            let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            m.fiber.x = (c + s * region.half_width).rem_euclid(TAU);
            if !region.is_good(m.fiber.x) {
                m.fiber.x = (c + s * region.half_width * (1.0 + 1e-15)).rem_euclid(TAU);
            }
        }
        let t = if i % 2 == 0 { if rng.gen::<bool>() { 1.0 } else { -1.0 } } else { rng.gen_range(-1.0..1.0) };
        let scale = rng.gen_range(0.1..10.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let v = [scale, scale * t * theta * (1.0 - 1e-12), 0.0, 0.0];
        check_center_expansion(params, &m, v).expect("sample satisfies preconditions")
    });
    let violations = reports.iter().filter(|r| r.violation).count();
    let min_growth = reports.iter().map(|r| r.growth).fold(f64::INFINITY, f64::min);
    let worst_image_ratio = reports.iter().map(|r| r.image_ratio).fold(0.0, f64::max);
    ExpansionSweepReport {
        n_samples,
        violations,
        min_growth,
        growth_bound: params.n.sqrt(),
        worst_image_ratio,
        theta,
        pass: violations == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb;
    use crate::torus::BasePoint;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn at_x(x: f64, p: &MapParams) -> TorusPoint<f64> {
        TorusPoint::new(x, 0.0, BasePoint::zero(p.bits))
    }

    #[test]
    fn region_examples() {
        let r = RegionSpec::new(100.0);
        assert_abs_diff_eq!(r.half_width, 0.50238, epsilon = 1e-5);
        assert!(r.is_good(0.0));
        assert!(!r.is_good(1.6));
        assert!(r.is_good(FRAC_PI_2 + r.half_width));
        assert!(r.is_good(3.0 * FRAC_PI_2 - r.half_width));
        assert_abs_diff_eq!(r.excluded_fraction(), 0.31983, epsilon = 1e-5);
        assert_abs_diff_eq!(r.excluded_fraction(), 8.0 / TAU * 100f64.powf(-0.3), epsilon = 1e-12);
    }

    #[test]
    fn good_region_flavors() {
        let b = BasePoint::zero(128);
        let m = TorusPoint::new(0.0, 1.6, b);
        assert!(in_good_region(100.0, &m, Flavor::U));
        assert!(!in_good_region(100.0, &m, Flavor::S));
    }

    #[test]
    fn cone_examples() {
        let h = HyperbolicMatrix::cat_map();
        let es = [0.0, 0.0, h.e_s[0], h.e_s[1]];
        assert!(cone_contains(&h, ConeSpec { kind: ConeKind::Stable, size: 1e-9 }, es).unwrap());
        let hor = ConeSpec { kind: ConeKind::Horizontal, size: 0.0631 };
        assert!(cone_contains(&h, hor, [102.0, 1.0, 0.0, 0.0]).unwrap());
        assert!(!cone_contains(&h, hor, [1.0, 1.0, 0.0, 0.0]).unwrap());
        assert_eq!(cone_contains(&h, hor, [0.0; 4]), Err(LabError::ZeroVector));
    }

    #[test]
    fn center_expansion_examples() {
        let p = MapParams::standard(100.0).unwrap();
        let r = check_center_expansion(&p, &at_x(0.0, &p), [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.growth, 202.0025, epsilon = 1e-3);
        assert!(r.in_cone_after && !r.violation);

        let hw = RegionSpec::new(100.0).half_width;
        let x = FRAC_PI_2 - hw;
        assert_abs_diff_eq!(x.cos(), 0.48152, epsilon = 1e-5);
        let r = check_center_expansion(&p, &at_x(x, &p), [1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.growth, (98.304f64.powi(2) + 1.0).sqrt(), epsilon = 1e-2);

        let theta = 100f64.powf(-0.6);
        let r = check_center_expansion(&p, &at_x(0.0, &p), [1.0, theta, 0.0, 0.0]).unwrap();
        assert!(r.in_cone_after && r.growth > 10.0);

        assert!(check_center_expansion(&p, &at_x(1.6, &p), [1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(check_center_expansion(&p, &at_x(0.0, &p), [1.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn invariant_direction_has_tiny_ratio() {
        // the image of e_u keeps a center part of relative size |e_u.x| lambda^[N]
        for n in [20.0, 40.0] {
            let p = MapParams::standard(n).unwrap();
            let m = at_x(1.0, &p);
            let j = p.split_jacobian(&p.derivative(&m, Direction::Forward));
            let w = j * Vector4::new(0.0, 0.0, 0.0, 1.0);
            let r = split_ratio(ConeKind::Unstable, &[w[0], w[1], w[2], w[3]]);
            let want = p.matrix.e_u[0] * p.matrix.lambda.powi(n as i32);
            assert!((r - want).abs() < 1e-12 * want.max(1e-300) + 1e-300, "{r} {want}");
            if n >= 40.0 {
                assert!(r < 1e-12);
            }
        }
    }

    #[test]
    fn small_sweeps_pass() {
        for eps in [0.0, 1e-3] {
            let p = perturb(&MapParams::standard(20.0).unwrap(), eps, 1).unwrap();
            for kind in [ConeKind::Unstable, ConeKind::Stable] {
                let r = cone_invariance_sweep(&p, ConeSpec { kind, size: 0.1 }, 500, 3).unwrap();
                assert!(r.pass, "{r:?}");
            }
            let e = center_expansion_sweep(&MapParams::standard(100.0).unwrap(), 2000, 4);
            assert!(e.pass, "{e:?}");
        }
    }

    #[test]
    fn parallel_and_sequential_sweeps_agree() {
        let p = MapParams::standard(10.0).unwrap();
        let c = ConeSpec { kind: ConeKind::Unstable, size: 0.1 };
        let a = cone_invariance_sweep_with(Exec::Parallel, &p, c, 300, 9).unwrap();
        let b = cone_invariance_sweep_with(Exec::Sequential, &p, c, 300, 9).unwrap();
        assert_eq!(a.worst_ratio, b.worst_ratio);
    }

    proptest! {
        #[test]
        fn involution_swaps_center_cones(vx in -5.0f64..5.0, vy in -5.0f64..5.0, theta in 0.01f64..1.0) {
            prop_assume!(vx != 0.0 || vy != 0.0);
            let h = HyperbolicMatrix::cat_map();
            let a = cone_contains(&h, ConeSpec { kind: ConeKind::Horizontal, size: theta }, [vx, vy, 0.0, 0.0]).unwrap();
            let b = cone_contains(&h, ConeSpec { kind: ConeKind::Vertical, size: theta }, [vy, vx, 0.0, 0.0]).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
