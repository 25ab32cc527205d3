//! Crossings of strong leaves in the base, holonomies between center leaves
//! and the center leaf shared by a center-unstable and a center-stable leaf.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::bundle::{default_iterations, invariant_direction, Bundle};
use crate::cones::{split_ratio, ConeKind};
use crate::error::LabError;
use crate::mp::Mp;
use crate::par::{map_indices, Exec};
use crate::real::Real;
use crate::rng::{random_point, stream};
use crate::skew::MapParams;
use crate::torus::{fiber_dist, BasePoint, FiberPoint, TorusPoint};

use super::leaf::{auto_depth, chart_params, LeafChart};

/// Largest minimal crossing radius for `[[2,1],[1,1]]`, rounded up. It is
/// attained at base offset `(pi, pi)`; random pairs stay below it.
pub const HETEROCLINIC_RADIUS: f64 = 4.325;

/// Lattice translates tried in each coordinate, at least.
const LATTICE_REACH: i64 = 4;
/// Transverse offset below which a base point counts as on a line.
const ON_LINE_TOL: f64 = 1e-9;

/// Solution of `from + t e_u = to + s e_s` modulo `2pi Z^2`.
#[derive(Clone, Debug, Serialize)]
pub struct BaseCrossing {
    pub t: f64,
    pub s: f64,
    #[serde(skip)]
    pub exact: [Mp; 2],
    /// Lattice translate `k` with `t e_u - s e_s = to - from + 2pi k`.
    pub translate: [i64; 2],
    /// `max(|t|, |s|)`.
    pub radius: f64,
}

fn eigen_coords(params: &MapParams, d: [f64; 2], k: [i64; 2]) -> [f64; 2] {
    params.matrix.to_eigen([d[0] + TAU * k[0] as f64, d[1] + TAU * k[1] as f64])
}

fn exact_coords(params: &MapParams, from: &BasePoint, to: &BasePoint, k: [i64; 2]) -> [Mp; 2] {
    let d = to.diff_angles::<Mp>(&from.with_bits(to.bits));
    let tp = Mp::two_pi();
    params.matrix.to_eigen_in([d[0] + tp * Mp::of(k[0] as f64), d[1] + tp * Mp::of(k[1] as f64)])
}

fn translates(reach: i64) -> impl Iterator<Item = [i64; 2]> {
    (-reach..=reach).flat_map(move |a| (-reach..=reach).map(move |b| [a, b]))
}

/// Crossing of the unstable line through `from` with the stable line
/// through `to` with the smallest `max(|t|, |s|)`.
pub fn heteroclinic_base(
    params: &MapParams,
    from: &BasePoint,
    to: &BasePoint,
    radius: f64,
) -> Result<BaseCrossing, LabError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(LabError::InvalidParameter(format!("radius {radius} must be positive")));
    }
    let d = to.diff_angles::<f64>(&from.with_bits(to.bits));
    let reach = ((radius / PI).ceil() as i64 + 1).max(LATTICE_REACH);
    let (k, r) = translates(reach)
        .map(|k| {
            let [sc, uc] = eigen_coords(params, d, k);
            (k, sc.abs().max(uc.abs()))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty search");
    if r > radius {
        return Err(LabError::SearchRadiusExhausted { radius, min_radius: r });
    }
    let [sc, uc] = exact_coords(params, from, to, k);
    Ok(BaseCrossing { t: uc.hi(), s: -sc.hi(), exact: [uc, -sc], translate: k, radius: r })
}

/// Largest minimal crossing radius over random base pairs.
pub fn measure_heteroclinic_radius(params: &MapParams, n_pairs: usize, seed: u64) -> Result<f64, LabError> {
    let radii = map_indices(Exec::default(), n_pairs, |i| {
        let mut rng = stream(seed, i as u64);
        let a = random_point(&mut rng, params.bits).base;
        let b = random_point(&mut rng, params.bits).base;
        heteroclinic_base(params, &a, &b, 1e3).map(|c| c.radius)
    });
    radii.into_iter().try_fold(0.0, |m, r| r.map(|r| f64::max(m, r)))
}

#[derive(Clone, Debug, Serialize)]
pub struct HeteroclinicCenter {
    pub crossing: BaseCrossing,
    /// Point of the shared center leaf: the unstable leaf of `p` at base
    /// parameter `t`.
    #[serde(skip)]
    pub z: TorusPoint<Mp>,
    pub w_u: TorusPoint<f64>,
    /// Stable leaf of `w_u` followed back to the center leaf of `q`.
    pub m_q: TorusPoint<f64>,
    /// Base distance of `w_u` from `pi_v(q) + s e_s`.
    pub crossing_residual: f64,
    /// Base distance of `m_q` from `pi_v(q)`.
    pub return_residual: f64,
}

fn base_gap(a: &BasePoint, b: &BasePoint) -> f64 {
    let d = a.diff_angles::<f64>(&b.with_bits(a.bits));
    d[0].hypot(d[1])
}

/// The center leaf through `W^uu(p; R)` and `W^ss(q; R)`.
pub fn heteroclinic_center(
    params: &MapParams,
    p: &TorusPoint<f64>,
    q: &TorusPoint<f64>,
    radius: f64,
) -> Result<HeteroclinicCenter, LabError> {
    if params.is_perturbed() {
        return Err(LabError::PreconditionViolated("heteroclinic leaves need the unperturbed map".into()));
    }
    let crossing = heteroclinic_base(params, &p.base, &q.base, radius)?;
    let [t, s] = crossing.exact;
    let depth = auto_depth(params, crossing.radius);
    let hp = chart_params(params, depth)?;
    let lift = |m: &TorusPoint<f64>| TorusPoint { fiber: m.fiber.cast::<Mp>(), base: m.base.with_bits(hp.bits) };
    let z = LeafChart::new(&hp, &lift(p), Bundle::Uu, depth)?.point(&hp, t);
    let m_q = LeafChart::new(&hp, &z, Bundle::Ss, depth)?.point(&hp, -s);
    let (es, _) = hp.matrix.eigvecs::<Mp>();
    let target = lift(q).base.shifted_by([s * es[0], s * es[1]]);
    Ok(HeteroclinicCenter {
        crossing_residual: base_gap(&z.base, &target),
        return_residual: base_gap(&m_q.base, &q.base),
        w_u: z.to_f64(),
        m_q: m_q.to_f64(),
        z,
        crossing,
    })
}

/// Base parameter `s` with `to = from + s e` (`e_u` or `e_s`) and the
/// transverse offset of the best lattice translate.
pub fn leaf_offset(params: &MapParams, from: &BasePoint, to: &BasePoint, flavor: Bundle) -> (Mp, f64) {
    let d = to.diff_angles::<f64>(&from.with_bits(to.bits));
    let split = |c: [f64; 2]| match flavor {
        Bundle::Uu => (c[1], c[0]),
        Bundle::Ss => (c[0], c[1]),
    };
    let k = translates(2 * LATTICE_REACH)
        .min_by(|a, b| {
            let (ta, oa) = split(eigen_coords(params, d, *a));
            let (tb, ob) = split(eigen_coords(params, d, *b));
            oa.abs().total_cmp(&ob.abs()).then(ta.abs().total_cmp(&tb.abs()))
        })
        .expect("non-empty search");
    let c = exact_coords(params, from, to, k);
    let (t, off) = match flavor {
        Bundle::Uu => (c[1], c[0]),
        Bundle::Ss => (c[0], c[1]),
    };
    (t, off.abs().hi())
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyHit {
    pub flavor: Bundle,
    #[serde(skip)]
    pub exact: TorusPoint<Mp>,
    pub point: TorusPoint<f64>,
    /// Base parameter travelled along the strong leaf.
    pub travel: f64,
    /// Base distance between the leaf endpoint and `pi_v(q)` before it is
    /// snapped onto the center leaf of `q`.
    pub base_residual: f64,
}

/// Strong stable (or unstable) holonomy from the center leaf of `p` to that
/// of `q`, applied to the fiber point `w`.
pub fn holonomy(
    params: &MapParams,
    p: &TorusPoint<f64>,
    q: &TorusPoint<f64>,
    w: FiberPoint<f64>,
    flavor: Bundle,
) -> Result<HolonomyHit, LabError> {
    if params.is_perturbed() {
        return Err(LabError::PreconditionViolated("holonomy needs the unperturbed map".into()));
    }
    let (s, offset) = leaf_offset(params, &p.base, &q.base, flavor);
    if offset > ON_LINE_TOL {
        return Err(LabError::NotOnLeaf { offset });
    }
    let depth = auto_depth(params, s.abs().hi());
    let hp = chart_params(params, depth)?;
    let anchor = TorusPoint { fiber: w.cast::<Mp>(), base: p.base.with_bits(hp.bits) };
    let end = LeafChart::new(&hp, &anchor, flavor, depth)?.point(&hp, s);
    let qb = q.base.with_bits(hp.bits);
    let base_residual = base_gap(&end.base, &qb);
    if base_residual > ON_LINE_TOL {
        return Err(LabError::VerificationFailed(format!("leaf ends {base_residual:.3e} away from the target base")));
    }
    let exact = TorusPoint { fiber: end.fiber, base: qb };
    Ok(HolonomyHit { flavor, point: exact.to_f64(), exact, travel: s.hi(), base_residual })
}

/// Leaf pair used for defect comparisons across `N`: `q` sits at base
/// parameter `travel` along the stable (or unstable) line of `p`.
pub fn standard_pair(params: &MapParams, flavor: Bundle, travel: f64) -> (TorusPoint<f64>, TorusPoint<f64>) {
    let p = TorusPoint::new(0.0, 0.0, BasePoint::from_angles(1.0, 2.0, params.bits));
    let e = match flavor {
        Bundle::Uu => params.matrix.e_u,
        Bundle::Ss => params.matrix.e_s,
    };
    let q = TorusPoint::new(0.0, 0.0, p.base.shifted_by([travel * e[0], travel * e[1]]));
    (p, q)
}

#[derive(Clone, Debug, Serialize)]
pub struct HolonomyDefect {
    pub n: f64,
    pub flavor: Bundle,
    pub grid: usize,
    pub travel: f64,
    /// Largest fiber distance between the holonomy and the vertical map.
    pub sup: f64,
    pub mean: f64,
    /// Largest cone ratio of the strong direction at the leaf endpoints.
    pub alpha: f64,
    /// `2 alpha |travel|`.
    pub bound: f64,
    pub within_bound: bool,
}

/// Compares the holonomy from the center leaf of `p` to that of `q` with the
/// vertical map over a `grid x grid` lattice of fiber points. For the
/// unperturbed map the vertical map keeps fiber coordinates.
pub fn holonomy_defect(
    params: &MapParams,
    p: &TorusPoint<f64>,
    q: &TorusPoint<f64>,
    flavor: Bundle,
    grid: usize,
) -> Result<HolonomyDefect, LabError> {
    holonomy_defect_with(Exec::default(), params, p, q, flavor, grid)
}

pub fn holonomy_defect_with(
    exec: Exec,
    params: &MapParams,
    p: &TorusPoint<f64>,
    q: &TorusPoint<f64>,
    flavor: Bundle,
    grid: usize,
) -> Result<HolonomyDefect, LabError> {
    if grid == 0 {
        return Err(LabError::InvalidParameter("grid must be positive".into()));
    }
    let kind = match flavor {
        Bundle::Uu => ConeKind::Unstable,
        Bundle::Ss => ConeKind::Stable,
    };
    let iters = default_iterations(params.n).max(12);
    let rows = map_indices(exec, grid * grid, |i| -> Result<(f64, f64, f64), LabError> {
        let h = TAU / grid as f64;
        let w = FiberPoint::new(h * ((i / grid) as f64 + 0.5), h * ((i % grid) as f64 + 0.5));
        let hit = holonomy(params, p, q, w, flavor)?;
        let start = TorusPoint { fiber: w, base: p.base.clone() };
        let mut alpha = 0.0f64;
        for m in [&start, &hit.point] {
            let est = invariant_direction(params, m, flavor, iters)?;
            alpha = alpha.max(split_ratio(kind, &est.split));
        }
        Ok((fiber_dist(&hit.point.fiber, &w), alpha, hit.travel))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let sup = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let alpha = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let travel = rows[0].2;
    let bound = 2.0 * alpha * travel.abs();
    Ok(HolonomyDefect {
        n: params.n,
        flavor,
        grid,
        travel,
        sup,
        mean: rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64,
        alpha,
        bound,
        within_bound: sup <= bound,
    })
}
