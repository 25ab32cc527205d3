//! Strong stable and unstable leaves through a point.
//!
//! A leaf point at base parameter `t` is found by moving the anchor `depth`
//! steps against the growth direction, displacing it along the invariant
//! direction by the correspondingly contracted amount, and mapping back.

use num_bigint::BigInt;
use serde::Serialize;

use crate::bundle::{default_iterations, invariant_direction, Bundle};
use crate::cones::{cone_ratio, ConeKind};
use crate::error::LabError;
use crate::mp::Mp;
use crate::real::Real;
use crate::skew::MapParams;
use crate::torus::{torus_dist, FiberPoint, IntMat2, TorusPoint};

/// Default sample spacing on leaves.
pub const LEAF_DELTA: f64 = 0.05;
/// Sample budget for one leaf segment.
pub const LEAF_BUDGET: usize = 200_000;

#[derive(Clone, Debug)]
pub struct LeafChart<T = Mp> {
    pub flavor: Bundle,
    pub anchor: TorusPoint<T>,
    pub depth: u32,
    far: TorusPoint<T>,
    /// Fiber displacement at the far point per unit of parameter.
    fiber_rate: [T; 2],
    /// Unit base direction at the anchor in turns, as fixed-point numerators.
    along: [BigInt; 2],
    /// Exact base map from the anchor to the far point.
    carry: IntMat2,
}

/// Smallest depth at which a parameter of size `reach` is contracted below
/// `1e-20` at the far point.
pub fn auto_depth(params: &MapParams, reach: f64) -> u32 {
    let per = params.two_n_floor as f64 * params.matrix.mu.ln();
    let need = (reach.max(1.0).ln() + 46.0) / per;
    (need.ceil() as u32).max(1)
}

/// Base bits needed so that `depth` chart steps keep rounding below `2^-64`.
pub fn chart_bits(params: &MapParams, depth: u32) -> u32 {
    (params.two_n_floor as f64 * depth as f64 * params.matrix.mu.log2()).ceil() as u32 + 64
}

/// `params` lifted to at least [`chart_bits`] for `depth`.
pub fn chart_params(params: &MapParams, depth: u32) -> Result<MapParams, LabError> {
    let need = chart_bits(params, depth);
    if params.bits >= need {
        Ok(params.clone())
    } else {
        params.with_bits(need)
    }
}

impl<T: Real> LeafChart<T> {
    pub fn new(params: &MapParams, anchor: &TorusPoint<T>, flavor: Bundle, depth: u32) -> Result<Self, LabError> {
        if depth == 0 {
            return Err(LabError::InvalidParameter("leaf depth must be positive".into()));
        }
        let far = params.iterate(anchor, flavor.growth().reverse(), depth);
        Self::build(params, anchor.clone(), far, flavor, depth)
    }

    /// Chart whose far point is given; the anchor is `depth` steps away in
    /// the growth direction.
    pub fn from_far(params: &MapParams, far: &TorusPoint<T>, flavor: Bundle, depth: u32) -> Result<Self, LabError> {
        let anchor = params.iterate(far, flavor.growth(), depth);
        Self::build(params, anchor, far.clone(), flavor, depth)
    }

    fn build(
        params: &MapParams,
        anchor: TorusPoint<T>,
        far: TorusPoint<T>,
        flavor: Bundle,
        depth: u32,
    ) -> Result<Self, LabError> {
        if params.bits < chart_bits(params, depth) {
            return Err(LabError::PrecisionExhausted { generation: depth });
        }
        let est = invariant_direction(params, &far.to_f64(), flavor, default_iterations(params.n).max(12))?;
        let lead = match flavor {
            Bundle::Uu => est.split[3],
            Bundle::Ss => est.split[2],
        };
        let hm = &params.matrix;
        let (ls, lu) = hm.eigenvalues::<T>();
        // one step multiplies the leaf parameter by the eigenvalue to the
        // power [2N]; the far point lies where it is contracted
        let per_step = match flavor {
            Bundle::Uu => T::of(1.0) / lu,
            Bundle::Ss => ls,
        };
        let mut scale = T::of(1.0);
        for _ in 0..params.two_n_floor * depth {
            scale = scale * per_step;
        }
        let fiber_rate = [scale * T::of(est.split[0] / lead), scale * T::of(est.split[1] / lead)];
        // the direction must be resolved far below the base resolution: its
        // error transverse to the leaf is expanded on the way to the far end
        let prec = 2 * params.bits;
        let e = hm.eigvec_fixed(flavor == Bundle::Uu, prec);
        let inv_tau = (T::of(1.0) / T::two_pi()).to_fixed(params.bits);
        let along = [(&e[0] * &inv_tau) >> params.bits, (&e[1] * &inv_tau) >> params.bits];
        let step = hm.int().pow(params.two_n_floor * depth);
        let carry = match flavor {
            Bundle::Uu => step.inverse_unimodular(),
            Bundle::Ss => step,
        };
        Ok(LeafChart { flavor, anchor, depth, far, fiber_rate, along, carry })
    }

    /// Leaf point at base parameter `t` along `e_u` (or `e_s`).
    pub fn point(&self, params: &MapParams, t: T) -> TorusPoint<T> {
        self.point_fixed(params, &t.to_fixed(self.far.base.bits))
    }

    /// Leaf point at parameter `t_num / 2^bits`, for parameters finer than
    /// `T` resolves.
    pub fn point_fixed(&self, params: &MapParams, t_num: &BigInt) -> TorusPoint<T> {
        let f = &self.far.fiber;
        let bits = self.far.base.bits;
        let du = (t_num * &self.along[0]) >> (2 * bits);
        let dv = (t_num * &self.along[1]) >> (2 * bits);
        // exact transport keeps the base shift at the anchor equal to t e
        let a = &self.carry.0;
        let fu = &a[0][0] * &du + &a[0][1] * &dv;
        let fv = &a[1][0] * &du + &a[1][1] * &dv;
        let t = T::from_signed_fixed(t_num, bits);
        let seed = TorusPoint {
            fiber: FiberPoint::new(f.x + t * self.fiber_rate[0], f.y + t * self.fiber_rate[1]).reduced(),
            base: self.far.base.shifted(&fu, &fv),
        };
        params.iterate(&seed, self.flavor.growth(), self.depth)
    }
}

/// Single leaf point at parameter `t` with an automatic depth.
pub fn leaf_point(
    params: &MapParams,
    m: &TorusPoint<Mp>,
    flavor: Bundle,
    t: Mp,
) -> Result<TorusPoint<Mp>, LabError> {
    let chart = LeafChart::new(params, m, flavor, auto_depth(params, t.abs().hi()))?;
    Ok(chart.point(params, t))
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafSegment {
    pub flavor: Bundle,
    pub anchor: TorusPoint<f64>,
    /// Base parameter of each sample, increasing.
    pub params: Vec<f64>,
    pub samples: Vec<TorusPoint<f64>>,
    pub arclength: f64,
    pub radius: f64,
    pub delta: f64,
    pub depth: u32,
    /// Endpoint displacement when the depth is increased by one.
    pub error_estimate: f64,
    /// Largest cone ratio of the discrete tangents.
    pub max_cone_ratio: f64,
    #[serde(skip)]
    pub chart: LeafChart,
}

impl LeafSegment {
    /// Index of the sample at the anchor.
    pub fn anchor_index(&self) -> usize {
        self.params.iter().position(|t| *t == 0.0).expect("anchor is sampled")
    }

    /// Largest distance of a sample's base from the linear leaf
    /// `anchor + t e` of the base automorphism.
    pub fn base_line_residual(&self, params: &MapParams) -> f64 {
        let (es, eu) = params.matrix.eigvecs::<Mp>();
        let e = match self.flavor {
            Bundle::Uu => eu,
            Bundle::Ss => es,
        };
        self.params
            .iter()
            .zip(&self.samples)
            .map(|(t, p)| {
                let t = Mp::of(*t);
                let want = self.anchor.base.shifted_by([t * e[0], t * e[1]]);
                let d = p.base.diff_angles::<Mp>(&want);
                (d[0] * d[0] + d[1] * d[1]).sqrt().hi()
            })
            .fold(0.0, f64::max)
    }
}

/// Adaptive samples of `t -> eval(t)` on `[lo, hi]` with consecutive points
/// within `delta`.
pub(crate) fn refine<T, F>(
    lo: f64,
    hi: f64,
    delta: f64,
    budget: usize,
    eval: F,
) -> Result<(Vec<f64>, Vec<TorusPoint<T>>), LabError>
where
    T: Real,
    F: Fn(f64) -> TorusPoint<T> + Sync,
{
    let n0 = (((hi - lo) / delta).ceil() as usize).max(1);
    let mut ts: Vec<f64> = (0..=n0).map(|i| lo + (hi - lo) * i as f64 / n0 as f64).collect();
    if ts.len() > budget {
        return Err(LabError::RefinementBudget { t_lo: lo, t_hi: hi });
    }
    let mut pts: Vec<TorusPoint<T>> = crate::par::map_slice(crate::par::Exec::default(), &ts, |t| eval(*t));
    loop {
        let bad: Vec<usize> = (0..ts.len() - 1)
            .filter(|&i| torus_dist(&pts[i], &pts[i + 1]).hi() > delta)
            .collect();
        if bad.is_empty() {
            return Ok((ts, pts));
        }
        if ts.len() + bad.len() > budget {
            let i = bad[0];
            return Err(LabError::RefinementBudget { t_lo: ts[i], t_hi: ts[i + 1] });
        }
        let mids: Vec<f64> = bad.iter().map(|&i| 0.5 * (ts[i] + ts[i + 1])).collect();
        if bad.iter().zip(&mids).any(|(&i, m)| *m <= ts[i] || *m >= ts[i + 1]) {
            let i = bad[0];
            return Err(LabError::RefinementBudget { t_lo: ts[i], t_hi: ts[i + 1] });
        }
        let new_pts = crate::par::map_slice(crate::par::Exec::default(), &mids, |t| eval(*t));
        let mut nts = Vec::with_capacity(ts.len() + mids.len());
        let mut npts = Vec::with_capacity(ts.len() + mids.len());
        let mut k = 0;
        for i in 0..ts.len() {
            nts.push(ts[i]);
            npts.push(pts[i].clone());
            if k < bad.len() && bad[k] == i {
                nts.push(mids[k]);
                npts.push(new_pts[k].clone());
                k += 1;
            }
        }
        ts = nts;
        pts = npts;
    }
}

/// Leaf segment of arclength `r` on each side of `m`.
pub fn grow_leaf_segment(
    params: &MapParams,
    m: &TorusPoint<f64>,
    flavor: Bundle,
    r: f64,
    n_gen: u32,
) -> Result<LeafSegment, LabError> {
    grow_leaf_segment_with(params, &m.cast::<Mp>(), flavor, r, n_gen, LEAF_DELTA)
}

pub fn grow_leaf_segment_with(
    params: &MapParams,
    m: &TorusPoint<Mp>,
    flavor: Bundle,
    r: f64,
    n_gen: u32,
    delta: f64,
) -> Result<LeafSegment, LabError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LabError::InvalidParameter(format!("leaf radius {r} must be positive")));
    }
    if !(delta > 0.0) {
        return Err(LabError::InvalidParameter("delta must be positive".into()));
    }
    let depth = n_gen.max(1);
    let chart = LeafChart::new(params, m, flavor, depth)?;
    // the parameter runs slightly beyond r so that trimming finds arclength r
    let reach = r * 1.01 + delta;
    let half = |sign: f64| -> Result<(Vec<f64>, Vec<TorusPoint<Mp>>), LabError> {
        let (ts, pts) = refine(0.0, reach, delta, LEAF_BUDGET, |t| chart.point(params, Mp::of(sign * t)))?;
        trim(params, &chart, ts, pts, r, sign)
    };
    let (tp, pp) = half(1.0)?;
    let (tn, pn) = half(-1.0)?;
    let mut ts: Vec<f64> = tn.iter().rev().map(|t| -t).collect();
    let mut pts: Vec<TorusPoint<Mp>> = pn.into_iter().rev().collect();
    ts.pop();
    pts.pop();
    ts.extend(tp);
    pts.extend(pp);
    let arclength = polyline_length(&pts);
    let hm = &params.matrix;
    let kind = match flavor {
        Bundle::Uu => ConeKind::Unstable,
        Bundle::Ss => ConeKind::Stable,
    };
    let mut max_cone_ratio: f64 = 0.0;
    for w in pts.windows(2) {
        let d = w[1].diff(&w[0]).map(|c| c.hi());
        if let Ok(q) = cone_ratio(hm, kind, d) {
            max_cone_ratio = max_cone_ratio.max(q);
        }
    }
    let deeper = LeafChart::new(params, m, flavor, depth + 1)?;
    let ends = [ts[0], *ts.last().expect("non-empty")];
    let error_estimate = ends
        .iter()
        .map(|t| torus_dist(&chart.point(params, Mp::of(*t)), &deeper.point(params, Mp::of(*t))).hi())
        .fold(0.0, f64::max);
    Ok(LeafSegment {
        flavor,
        anchor: m.to_f64(),
        params: ts,
        samples: pts.iter().map(|p| p.to_f64()).collect(),
        arclength,
        radius: r,
        delta,
        depth,
        error_estimate,
        max_cone_ratio,
        chart,
    })
}

/// Cut a one-sided sample list at arclength `r` from its first point.
fn trim(
    params: &MapParams,
    chart: &LeafChart,
    mut ts: Vec<f64>,
    mut pts: Vec<TorusPoint<Mp>>,
    r: f64,
    sign: f64,
) -> Result<(Vec<f64>, Vec<TorusPoint<Mp>>), LabError> {
    let mut acc = 0.0;
    for i in 1..pts.len() {
        let d = torus_dist(&pts[i], &pts[i - 1]).hi();
        if acc + d >= r {
            let frac = (r - acc) / d;
            let t = ts[i - 1] + frac * (ts[i] - ts[i - 1]);
            ts.truncate(i);
            pts.truncate(i);
            ts.push(t);
            pts.push(chart.point(params, Mp::of(sign * t)));
            return Ok((ts, pts));
        }
        acc += d;
    }
    Err(LabError::RefinementBudget { t_lo: 0.0, t_hi: *ts.last().unwrap_or(&0.0) })
}

pub(crate) fn polyline_length<T: Real>(pts: &[TorusPoint<T>]) -> f64 {
    pts.windows(2).map(|w| torus_dist(&w[1], &w[0]).hi()).sum()
}
