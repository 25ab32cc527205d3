//! Fraction of long unstable curves inside the good region, and points whose
//! whole future (or past) stays there.

use std::f64::consts::{PI, TAU};

use num_bigint::{BigInt, RandBigInt};
use serde::Serialize;

use crate::bundle::Bundle;
use crate::cones::RegionSpec;
use crate::error::LabError;
use crate::mp::Mp;
use crate::par::{map_indices, Exec};
use crate::real::Real;
use crate::rng::stream;
use crate::skew::{Direction, MapParams};
use crate::torus::TorusPoint;

use super::leaf::{auto_depth, chart_bits, LeafChart};

/// Length of an unstable curve whose `x`-projection has length at least 1.
pub fn threshold_length(params: &MapParams) -> f64 {
    let l = params.matrix.lambda.powi(params.n_floor as i32);
    1.0 / (l * (params.matrix.e_u[0].abs() + 3.0 * l))
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodFractionReport {
    pub n: f64,
    pub radius: f64,
    pub n_steps: u32,
    pub n_samples: usize,
    pub seed: u64,
    /// Length of the image curve, `2 r mu^(2[N] n)`.
    pub image_length: f64,
    pub threshold: f64,
    pub fraction: f64,
    /// `1 - (8 / 2pi) N^(-3/10)`.
    pub expected: f64,
    /// `1 - 10 N^(-3/10)`.
    pub lower_bound: f64,
    pub lower_bound_vacuous: bool,
}

/// Monte Carlo estimate of the arclength fraction of `f^n(W^uu(m; r))` lying
/// in `G^u`.
///
/// The image is nearly a straight line in the base traversed at constant
/// speed, so arclength is proportional to the leaf parameter and samples are
/// drawn uniformly in it.
pub fn good_fraction(
    params: &MapParams,
    m: &TorusPoint<f64>,
    radius: f64,
    n_steps: u32,
    n_samples: usize,
    seed: u64,
) -> Result<GoodFractionReport, LabError> {
    good_fraction_with(Exec::default(), params, m, radius, n_steps, n_samples, seed)
}

pub fn good_fraction_with(
    exec: Exec,
    params: &MapParams,
    m: &TorusPoint<f64>,
    radius: f64,
    n_steps: u32,
    n_samples: usize,
    seed: u64,
) -> Result<GoodFractionReport, LabError> {
    if !(radius > 0.0 && radius < 1e30) {
        return Err(LabError::InvalidParameter(format!("radius {radius} outside (0, 1e30)")));
    }
    if n_samples == 0 {
        return Err(LabError::InvalidParameter("n_samples must be positive".into()));
    }
    let log_len = (2.0 * radius).ln() + (params.two_n_floor * n_steps) as f64 * params.matrix.mu.ln();
    let threshold = threshold_length(params);
    if log_len < threshold.ln() {
        return Err(LabError::PreconditionViolated(format!(
            "image length {:.3e} below threshold {threshold:.3e}",
            log_len.exp()
        )));
    }
    let depth = auto_depth(params, radius);
    // parameters must resolve x on the image, which moves mu^(2[N] n + [N])
    // times faster than the parameter
    let extra = (params.n_floor as f64 * params.matrix.mu.log2()).ceil() as u32;
    let bits = chart_bits(params, depth + n_steps) + extra;
    let hp = if params.bits >= bits { params.clone() } else { params.with_bits(bits)? };
    let anchor = TorusPoint { fiber: m.fiber.cast::<Mp>(), base: m.base.with_bits(hp.bits) };
    let chart = LeafChart::new(&hp, &anchor, Bundle::Uu, depth)?;
    let region = RegionSpec::new(params.n);
    let span = Mp::of(radius).to_fixed(hp.bits);
    let good = map_indices(exec, n_samples, |i| {
        let mut rng = stream(seed, i as u64);
        let t = rng.gen_bigint_range(&-&span, &span);
        let p = hp.iterate(&chart.point_fixed(&hp, &t), Direction::Forward, n_steps);
        region.is_good(p.fiber.x.hi())
    });
    let fraction = good.iter().filter(|g| **g).count() as f64 / n_samples as f64;
    let lower_bound = 1.0 - 10.0 * params.n.powf(-0.3);
    Ok(GoodFractionReport {
        n: params.n,
        radius,
        n_steps,
        n_samples,
        seed,
        image_length: log_len.exp(),
        threshold,
        fraction,
        expected: 1.0 - region.excluded_fraction(),
        lower_bound,
        lower_bound_vacuous: lower_bound <= 0.0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodPoint {
    pub flavor: Bundle,
    /// The point, at `bits` base precision.
    #[serde(skip)]
    pub point: TorusPoint<Mp>,
    #[serde(rename = "point")]
    pub approx: TorusPoint<f64>,
    pub bits: u32,
    /// First time from which every iterate is good.
    pub first_good: u32,
    pub horizon: u32,
    /// Smallest slack of the tested coordinate outside the critical strips
    /// over times `first_good..=horizon`.
    pub min_margin: f64,
    /// Number of nested restrictions made.
    pub corrections: u32,
    /// Base distance moved from the anchor, in radians.
    pub offset: f64,
}

/// Base bits used by [`persistent_good_point`] for a given horizon.
pub fn good_point_bits(params: &MapParams, horizon: u32) -> u32 {
    (params.two_n_floor as f64 * horizon as f64 * params.matrix.mu.log2()).ceil() as u32 + 128
}

/// Slack of `angle` outside the critical strips (negative inside them).
fn slack(region: &RegionSpec, angle: f64) -> f64 {
    let d = |c: f64| {
        let r = (angle - c).rem_euclid(TAU);
        r.min(TAU - r)
    };
    d(0.5 * PI).min(d(1.5 * PI)) - region.half_width
}

/// A point on the strong leaf `W(anchor; radius)` whose iterates (forward
/// for `Uu`, backward for `Ss`) stay in the good region from some time on.
///
/// The nested subcurves of the construction are tracked by a representative
/// point and the half-length of the current subcurve. When the next
/// coordinate is critical, the representative slides along the leaf so that
/// it lands at the middle of a good arc; afterwards the subcurve is cut to
/// the part whose image lies within a quarter of that spot. The slide is
/// applied to the base only, along an eigenvector resolved to the full base
/// precision; the fiber part of the leaf direction, of relative size
/// `lambda^N`, is dropped. The result is re-simulated from scratch before it
/// is returned.
pub fn persistent_good_point(
    params: &MapParams,
    anchor: &TorusPoint<f64>,
    flavor: Bundle,
    radius: f64,
    horizon: u32,
) -> Result<GoodPoint, LabError> {
    if horizon == 0 {
        return Err(LabError::InvalidParameter("horizon must be at least 1".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(LabError::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let bits = good_point_bits(params, horizon).max(params.bits);
    let hp = if params.bits == bits { params.clone() } else { params.with_bits(bits)? };
    let hm = &hp.matrix;
    let dir = flavor.growth();
    let region = RegionSpec::new(hp.n);
    let coord = |p: &TorusPoint<Mp>| match flavor {
        Bundle::Uu => p.fiber.x.hi(),
        Bundle::Ss => p.fiber.y.hi(),
    };
    let (e, gain) = match flavor {
        Bundle::Uu => (hm.eigvec_fixed(true, bits), hm.unstable_pow(hp.n_floor as i32) * hm.e_u[0]),
        Bundle::Ss => (hm.eigvec_fixed(false, bits), hm.stable_pow(-(hp.n_floor as i32)) * hm.e_s[0]),
    };
    let log2_mu = hm.mu.log2();
    let stretch = hp.two_n_floor as f64 * hm.mu.ln();
    let good_half = 0.5 * PI - region.half_width;
    if good_half <= 0.0 {
        return Err(LabError::PreconditionViolated(format!("no good region at N = {}", hp.n)));
    }
    let quarter = 0.25f64.min(0.5 * good_half);
    let start = TorusPoint { fiber: anchor.fiber.cast::<Mp>(), base: anchor.base.with_bits(bits) };
    let mut m0 = start.clone();
    // log of the allowed slide at the current time, in radians
    let mut log_room = radius.ln();
    let mut corrections = 0;
    let orbit_to = |m0: &TorusPoint<Mp>, k: u32| hp.iterate(m0, dir, k);
    for k in 1..=horizon {
        let prev = orbit_to(&m0, k - 1);
        let mut v = coord(&hp.step(&prev, dir));
        let mut slid = 0.0f64;
        if slack(&region, v) < quarter {
            for _ in 0..3 {
                let target = if v.cos() >= 0.0 { 0.0 } else { PI };
                let delta = (target - v + PI).rem_euclid(TAU) - PI;
                let shift = delta / gain;
                if (slid + shift).abs().ln() > log_room {
                    break;
                }
                // a slide by `shift` at time k - 1 is a slide by `shift` times
                // mu^(-2[N](k-1)) at time 0, in base turns
                let log2 = (shift.abs() / TAU).log2() - (hp.two_n_floor * (k - 1)) as f64 * log2_mu;
                let mut c = fixed_pow2(log2 + bits as f64);
                if shift < 0.0 {
                    c = -c;
                }
                let pu = (&c * &e[0]) >> bits;
                let pv = (&c * &e[1]) >> bits;
                m0.base = m0.base.shifted(&pu, &pv);
                slid += shift;
                v = coord(&hp.iterate(&m0, dir, k));
                if slack(&region, v) >= quarter {
                    break;
                }
            }
            if slid != 0.0 {
                corrections += 1;
            }
        }
        let room_now = remaining(log_room, slid);
        if slack(&region, v) >= quarter {
            // keep the part of the subcurve whose image stays near v
            log_room = room_now.min((quarter / gain.abs()).ln());
        } else if room_now > (TAU / gain.abs()).ln() {
            return Err(LabError::NoSubcurve(format!("no good arc reachable at generation {k}")));
        } else {
            log_room = room_now;
        }
        log_room += stretch;
    }
    let mut first_good = 0;
    let mut min_margin = f64::INFINITY;
    let mut p = m0.clone();
    let mut margins = Vec::with_capacity(horizon as usize + 1);
    for k in 0..=horizon {
        if k > 0 {
            p = hp.step(&p, dir);
        }
        margins.push(slack(&region, coord(&p)));
    }
    for (k, s) in margins.iter().enumerate() {
        if *s < 0.0 {
            first_good = k as u32 + 1;
        }
    }
    if first_good > horizon {
        return Err(LabError::NoSubcurve(format!("critical at the horizon {horizon}")));
    }
    for s in &margins[first_good as usize..] {
        min_margin = min_margin.min(*s);
    }
    let d = m0.base.diff_angles::<f64>(&start.base);
    Ok(GoodPoint {
        flavor,
        approx: m0.to_f64(),
        point: m0,
        bits,
        first_good,
        horizon,
        min_margin,
        corrections,
        offset: d[0].hypot(d[1]),
    })
}

/// `2^log2` rounded to an integer, with 60 significant bits.
fn fixed_pow2(log2: f64) -> BigInt {
    let ex = log2.floor();
    let m = BigInt::from((2f64.powf(log2 - ex) * 2f64.powi(60)).round() as u64);
    let sh = ex as i64 - 60;
    if sh >= 0 {
        m << sh as u32
    } else {
        m >> (-sh) as u32
    }
}

/// `ln(exp(log_room) - |used|)`, or `-inf` when nothing is left.
fn remaining(log_room: f64, used: f64) -> f64 {
    if used == 0.0 {
        return log_room;
    }
    let r = 1.0 - (used.abs().ln() - log_room).exp();
    if r <= 0.0 {
        f64::NEG_INFINITY
    } else {
        log_room + r.ln()
    }
}

#[cfg(test)]
mod tests;
