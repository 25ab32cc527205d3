//! Strong stable and unstable directions, the pinched projection bounds and
//! finite-time Lyapunov spectra.

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::error::LabError;
use crate::par::{map_indices, Exec};
use crate::rng::{random_point, stream};
use crate::skew::{Direction, MapParams};
use crate::torus::{split_vector, TorusPoint};

/// Gap above which an invariant direction counts as unconverged.
pub const GAP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bundle {
    Ss,
    Uu,
}

impl Bundle {
    /// Time direction in which the leaf expands.
    pub fn growth(self) -> Direction {
        match self {
            Bundle::Uu => Direction::Forward,
            Bundle::Ss => Direction::Backward,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BundleEstimate {
    pub point: TorusPoint<f64>,
    pub flavor: Bundle,
    /// Unit ambient vector `(x, y, z, w)`.
    pub vector: [f64; 4],
    /// The same vector in split coordinates `(x, y, s, u)`.
    pub split: [f64; 4],
    pub iterations: u32,
    pub convergence_gap: f64,
}

fn normalize(v: Vector4<f64>) -> Vector4<f64> {
    // entries reach mu^{2[N]} ~ 1e250, whose square overflows
    let v = v / v.amax();
    v / v.norm()
}

/// Angle between two lines.
pub fn line_angle(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let (a, b) = (normalize(Vector4::from(*a)), normalize(Vector4::from(*b)));
    // the sine form stays accurate for nearly parallel lines
    let d = (a - b).norm().min((a + b).norm());
    2.0 * (0.5 * d).min(1.0).asin()
}

/// Split-coordinate Jacobians along the orbit segment that carries a seed
/// from `n_iter` steps away to `m`, ordered from the far end.
fn transport(params: &MapParams, m: &TorusPoint<f64>, flavor: Bundle, n_iter: u32) -> Vec<Matrix4<f64>> {
    let dir = match flavor {
        Bundle::Uu => Direction::Forward,
        Bundle::Ss => Direction::Backward,
    };
    let back = dir.reverse();
    let mut orbit = Vec::with_capacity(n_iter as usize);
    let mut p = m.clone();
    for _ in 0..n_iter {
        p = params.step(&p, back);
        orbit.push(p.clone());
    }
    orbit.reverse();
    orbit.iter().map(|q| params.split_jacobian(&params.derivative(q, dir))).collect()
}

/// `E^uu(m)` by pushing a seed forward from `m_{-n}`, or `E^ss(m)` by
/// pulling a seed back from `m_n`.
pub fn invariant_direction(
    params: &MapParams,
    m: &TorusPoint<f64>,
    flavor: Bundle,
    n_iter: u32,
) -> Result<BundleEstimate, LabError> {
    invariant_direction_tol(params, m, flavor, n_iter, GAP_TOL)
}

pub fn invariant_direction_tol(
    params: &MapParams,
    m: &TorusPoint<f64>,
    flavor: Bundle,
    n_iter: u32,
    tol: f64,
) -> Result<BundleEstimate, LabError> {
    if n_iter == 0 {
        return Err(LabError::InvalidParameter("n_iter must be at least 1".into()));
    }
    let seed = match flavor {
        Bundle::Uu => Vector4::new(0.0, 0.0, 0.0, 1.0),
        Bundle::Ss => Vector4::new(0.0, 0.0, 1.0, 0.0),
    };
    let jacs = transport(params, m, flavor, n_iter);
    // a second seed started one step later gives the convergence gap
    let mut v = seed;
    let mut w = seed;
    for (k, j) in jacs.iter().enumerate() {
        v = normalize(j * v);
        if k > 0 {
            w = normalize(j * w);
        }
    }
    let split = [v[0], v[1], v[2], v[3]];
    if split.iter().any(|c| !c.is_finite()) {
        return Err(LabError::NonFinite("bundle vector"));
    }
    let gap = line_angle(&split, &[w[0], w[1], w[2], w[3]]);
    if gap > tol {
        return Err(LabError::NotConverged { gap });
    }
    let amb = crate::torus::SplitVector::from_array(split).ambient(&params.matrix);
    Ok(BundleEstimate {
        point: m.clone(),
        flavor,
        vector: amb,
        split,
        iterations: n_iter,
        convergence_gap: gap,
    })
}

/// Default iteration count for bundle estimates at parameter `n`.
pub fn default_iterations(n: f64) -> u32 {
    // contraction per step is about 2N / mu^{2[N]}
    if n >= 5.0 {
        8
    } else {
        60
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PinchSide {
    pub flavor: Bundle,
    /// Fiber coordinate tested: `x` for `uu`, `y` for `ss`.
    pub coordinate: char,
    pub center: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransversalityReport {
    pub n: f64,
    pub n_points: usize,
    pub seed: u64,
    pub lambda_n: f64,
    pub tolerance: f64,
    pub unstable: PinchSide,
    pub stable: PinchSide,
    /// Smallest angle between `E^ss` and `E^uu` over the sample.
    pub min_angle: f64,
    pub pass: bool,
}

/// Largest `N` at which `lambda^N` is resolvable relative to the band center.
pub const PINCH_MAX_N: f64 = 40.0;

pub fn transversality_check(params: &MapParams, n_points: usize, seed: u64) -> Result<TransversalityReport, LabError> {
    transversality_check_with(Exec::default(), params, n_points, seed)
}

pub fn transversality_check_with(
    exec: Exec,
    params: &MapParams,
    n_points: usize,
    seed: u64,
) -> Result<TransversalityReport, LabError> {
    if params.n > PINCH_MAX_N {
        return Err(LabError::PreconditionViolated(format!("N = {} above {PINCH_MAX_N}", params.n)));
    }
    if n_points == 0 {
        return Err(LabError::InvalidParameter("n_points must be positive".into()));
    }
    let hm = &params.matrix;
    let lam = hm.stable_pow(params.n_floor as i32).abs();
    let iters = default_iterations(params.n);
    let samples = map_indices(exec, n_points, |i| -> Result<(f64, f64, f64), LabError> {
        let m = random_point(&mut stream(seed, i as u64), params.bits);
        let uu = invariant_direction(params, &m, Bundle::Uu, iters)?;
        let ss = invariant_direction(params, &m, Bundle::Ss, iters)?;
        Ok((uu.split[0].abs() / lam, ss.split[1].abs() / lam, line_angle(&uu.vector, &ss.vector)))
    });
    let samples = samples.into_iter().collect::<Result<Vec<_>, _>>()?;
    let side = |flavor: Bundle, coordinate: char, center: f64, ratios: Vec<f64>| {
        let half = 3.0 * lam;
        let tol = 10.0 * f64::EPSILON * (center + half);
        let (lo, hi) = (center - half - tol, center + half + tol);
        PinchSide {
            flavor,
            coordinate,
            center,
            band_lo: lo,
            band_hi: hi,
            min_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
            max_ratio: ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            failures: ratios.iter().filter(|r| !(lo..=hi).contains(*r)).count(),
        }
    };
    let unstable = side(Bundle::Uu, 'x', hm.e_u[0].abs(), samples.iter().map(|s| s.0).collect());
    let stable = side(Bundle::Ss, 'y', hm.e_s[0].abs(), samples.iter().map(|s| s.1).collect());
    let min_angle = samples.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let pass = unstable.failures == 0 && stable.failures == 0;
    Ok(TransversalityReport {
        n: params.n,
        n_points,
        seed,
        lambda_n: lam,
        tolerance: 10.0 * f64::EPSILON,
        unstable,
        stable,
        min_angle,
        pass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub point: TorusPoint<f64>,
    pub horizon: u32,
    /// Descending.
    pub exponents: [f64; 4],
    pub sum_defect: f64,
}

/// Finite-time exponents by QR reorthonormalization of a frame carried in
/// split coordinates.
pub fn lyapunov_spectrum(params: &MapParams, m: &TorusPoint<f64>, horizon: u32) -> Result<LyapunovReport, LabError> {
    if horizon < 100 {
        return Err(LabError::InvalidParameter(format!("horizon {horizon} below 100")));
    }
    // a fixed generic frame keeps the ordering of directions irrelevant
    let start = Matrix4::new(
        1.0, 0.3, -0.2, 0.1, //
        0.2, 1.0, 0.4, -0.3, //
        -0.1, 0.2, 1.0, 0.5, //
        0.3, -0.4, 0.2, 1.0,
    );
    let mut q = start.qr().q();
    let mut logs = [0.0f64; 4];
    let mut p = m.clone();
    for _ in 0..horizon {
        let j = params.split_jacobian(&params.derivative(&p, Direction::Forward));
        let qr = (j * q).qr();
        let r = qr.r();
        for (k, l) in logs.iter_mut().enumerate() {
            *l += r[(k, k)].abs().ln();
        }
        q = qr.q();
        p = params.forward(&p);
    }
    if logs.iter().any(|l| !l.is_finite()) {
        return Err(LabError::NonFinite("lyapunov accumulation"));
    }
    let mut exponents = logs.map(|l| l / horizon as f64);
    exponents.sort_by(|a, b| b.total_cmp(a));
    let sum_defect = exponents.iter().sum::<f64>().abs();
    Ok(LyapunovReport { point: m.clone(), horizon, exponents, sum_defect })
}

/// Largest `|det Df - 1|` over random points (seed 0).
pub fn volume_defect(params: &MapParams, n_samples: usize) -> f64 {
    volume_defect_with(Exec::default(), params, n_samples, 0)
}

pub fn volume_defect_with(exec: Exec, params: &MapParams, n_samples: usize, seed: u64) -> f64 {
    map_indices(exec, n_samples, |i| {
        let m = random_point(&mut stream(seed, i as u64), params.bits);
        (params.derivative(&m, Direction::Forward).det() - 1.0).abs()
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Angle between `Df(m) E^uu(m)` and `E^uu(f m)`.
pub fn invariance_defect(params: &MapParams, m: &TorusPoint<f64>) -> Result<f64, LabError> {
    let it = default_iterations(params.n);
    let here = invariant_direction(params, m, Bundle::Uu, it)?;
    let there = invariant_direction(params, &params.forward(m), Bundle::Uu, it)?;
    let j = params.split_jacobian(&params.derivative(m, Direction::Forward));
    let pushed = j * Vector4::from(here.split);
    Ok(line_angle(&[pushed[0], pushed[1], pushed[2], pushed[3]], &there.split))
}

/// Split coordinates of an ambient vector, as an array.
pub fn to_split(params: &MapParams, v: [f64; 4]) -> [f64; 4] {
    split_vector(&params.matrix, v).as_array()
}

#[cfg(test)]
mod tests;
