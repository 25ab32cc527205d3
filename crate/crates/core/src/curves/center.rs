//! Curves inside center leaves, re-evaluated from a straight seed segment.

use serde::Serialize;

use crate::cones::ConeKind;
use crate::error::LabError;
use crate::mp::Mp;
use crate::real::Real;
use crate::skew::{Direction, MapParams};
use crate::torus::{fiber_dist, BasePoint, FiberPoint, TorusPoint};

use super::leaf::refine;

/// Sample budget for one center curve.
pub const CURVE_BUDGET: usize = 400_000;

/// A curve `t -> g^k(seed(t))` where `seed` is a straight segment in the
/// fiber over a fixed base point and `k` is the generation.
#[derive(Clone, Debug, Serialize)]
pub struct CenterCurve<T = Mp> {
    /// Base of the seed leaf.
    pub base: BasePoint,
    /// Base of the current leaf (exact for the unperturbed map).
    pub leaf: BasePoint,
    #[serde(skip)]
    pub seed: [FiberPoint<T>; 2],
    pub direction: Direction,
    pub generation: u32,
    /// Increasing parameters in `[0, 1]`.
    pub ts: Vec<f64>,
    pub samples: Vec<FiberPoint<f64>>,
    pub delta: f64,
    pub arclength: f64,
}

impl<T: Real> CenterCurve<T> {
    /// Generation-zero segment from `a` to `b` (unwrapped endpoints).
    pub fn segment(
        params: &MapParams,
        base: &BasePoint,
        a: FiberPoint<T>,
        b: FiberPoint<T>,
        direction: Direction,
        delta: f64,
    ) -> Result<Self, LabError> {
        let c = CenterCurve {
            base: base.clone(),
            leaf: base.clone(),
            seed: [a, b],
            direction,
            generation: 0,
            ts: vec![0.0, 1.0],
            samples: vec![],
            delta,
            arclength: 0.0,
        };
        c.resampled(params, 0, delta)
    }

    /// Segment of length `len` through `center` along the unit fiber
    /// direction `dir`.
    pub fn through(
        params: &MapParams,
        center: &TorusPoint<T>,
        dir: [f64; 2],
        len: f64,
        direction: Direction,
        delta: f64,
    ) -> Result<Self, LabError> {
        let h = T::of(0.5 * len);
        let (dx, dy) = (T::of(dir[0]), T::of(dir[1]));
        let f = center.fiber;
        let a = FiberPoint { x: f.x - h * dx, y: f.y - h * dy };
        let b = FiberPoint { x: f.x + h * dx, y: f.y + h * dy };
        Self::segment(params, &center.base, a, b, direction, delta)
    }

    /// Seed point at parameter `t`.
    pub fn seed_point(&self, t: T) -> TorusPoint<T> {
        let [a, b] = &self.seed;
        TorusPoint {
            fiber: FiberPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)).reduced(),
            base: self.base.clone(),
        }
    }

    /// Point of the curve at parameter `t`, evaluated from the seed.
    pub fn point(&self, params: &MapParams, t: T) -> TorusPoint<T> {
        params.iterate(&self.seed_point(t), self.direction, self.generation)
    }

    /// The same curve with the seed held in another precision.
    pub fn convert<S: Real>(&self) -> CenterCurve<S> {
        CenterCurve {
            base: self.base.clone(),
            leaf: self.leaf.clone(),
            seed: [self.seed[0].cast(), self.seed[1].cast()],
            direction: self.direction,
            generation: self.generation,
            ts: self.ts.clone(),
            samples: self.samples.clone(),
            delta: self.delta,
            arclength: self.arclength,
        }
    }

    /// Parameter range covered by the samples.
    pub fn range(&self) -> (f64, f64) {
        (self.ts[0], *self.ts.last().expect("curves are non-empty"))
    }

    fn resampled(&self, params: &MapParams, generation: u32, delta: f64) -> Result<Self, LabError> {
        if !(delta > 0.0) {
            return Err(LabError::InvalidParameter("delta must be positive".into()));
        }
        let mut c = CenterCurve { generation, ..self.clone() };
        let (lo, hi) = self.range();
        let (ts, pts) = refine(lo, hi, delta, CURVE_BUDGET, |t| c.point(params, T::of(t)))?;
        c.leaf = pts[0].base.clone();
        c.samples = pts.iter().map(|p| p.fiber.cast::<f64>()).collect();
        c.ts = ts;
        c.delta = delta;
        c.arclength = fiber_length(&c.samples);
        Ok(c)
    }

    /// Samples `lo..=hi` as a curve on the same seed.
    pub fn slice(&self, lo: usize, hi: usize) -> CenterCurve<T> {
        let samples = self.samples[lo..=hi].to_vec();
        CenterCurve {
            ts: self.ts[lo..=hi].to_vec(),
            arclength: fiber_length(&samples),
            samples,
            ..self.clone()
        }
    }

    /// The same curve with the seed cut down to its parameter range, so
    /// that parameters again run over `[0, 1]`.
    pub fn reseeded(&self) -> CenterCurve<T> {
        let (lo, hi) = self.range();
        let (a, b) = (self.seed_at(T::of(lo)), self.seed_at(T::of(hi)));
        let w = hi - lo;
        let ts = self
            .ts
            .iter()
            .map(|t| if w > 0.0 { ((t - lo) / w).clamp(0.0, 1.0) } else { 0.0 })
            .collect();
        CenterCurve { seed: [a, b], ts, ..self.clone() }
    }

    /// Parameter in reseeded coordinates.
    pub fn local_param(&self, t: f64) -> f64 {
        let (lo, hi) = self.range();
        if hi > lo {
            (t - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    fn seed_at(&self, t: T) -> FiberPoint<T> {
        let [a, b] = &self.seed;
        FiberPoint { x: a.x + t * (b.x - a.x), y: a.y + t * (b.y - a.y) }
    }

    /// Index of the sample nearest to parameter `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        match self.ts.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.ts.len() => self.ts.len() - 1,
            Err(i) => {
                if t - self.ts[i - 1] < self.ts[i] - t {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

/// Polyline length in the fiber.
pub fn fiber_length(samples: &[FiberPoint<f64>]) -> f64 {
    samples.windows(2).map(|w| fiber_dist(&w[0], &w[1])).sum()
}

/// `steps` further applications of the map, refined to spacing `delta`.
/// Only the unperturbed map keeps curves inside a single center leaf.
pub fn iterate_center_curve<T: Real>(
    params: &MapParams,
    c: &CenterCurve<T>,
    steps: u32,
    delta: f64,
) -> Result<CenterCurve<T>, LabError> {
    if params.is_perturbed() {
        return Err(LabError::PreconditionViolated("center curves need the unperturbed map".into()));
    }
    if steps == 0 {
        return Err(LabError::InvalidParameter("steps must be at least 1".into()));
    }
    advance(params, c, steps, delta)
}

/// Like [`iterate_center_curve`] but also for perturbed maps, whose images
/// only stay near a center leaf.
pub fn advance<T: Real>(params: &MapParams, c: &CenterCurve<T>, steps: u32, delta: f64) -> Result<CenterCurve<T>, LabError> {
    c.resampled(params, c.generation + steps, delta)
}

/// Whether the chord `d = (dx, dy)` lies in the horizontal or vertical cone.
pub fn chord_in_cone(kind: ConeKind, theta: f64, d: [f64; 2]) -> bool {
    match kind {
        ConeKind::Horizontal => d[1].abs() <= theta * d[0].abs(),
        ConeKind::Vertical => d[0].abs() <= theta * d[1].abs(),
        _ => false,
    }
}

/// Maximal runs of chords inside the cone, kept if at least `min_len` long.
pub fn extract_cone_subcurves<T: Real>(c: &CenterCurve<T>, kind: ConeKind, theta: f64, min_len: f64) -> Vec<CenterCurve<T>> {
    cone_runs(c, kind, theta, |_| true)
        .into_iter()
        .map(|(lo, hi)| c.slice(lo, hi))
        .filter(|s| s.arclength >= min_len && s.arclength > 0.0)
        .collect()
}

/// Runs `(lo, hi)` of sample indices whose chords lie in the cone and whose
/// samples all satisfy `keep`.
pub fn cone_runs<T: Real, F>(c: &CenterCurve<T>, kind: ConeKind, theta: f64, keep: F) -> Vec<(usize, usize)>
where
    F: Fn(&FiberPoint<f64>) -> bool,
{
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..c.samples.len().saturating_sub(1) {
        let (a, b) = (&c.samples[i], &c.samples[i + 1]);
        let ok = chord_in_cone(kind, theta, b.diff(a)) && keep(a) && keep(b);
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, c.samples.len() - 1));
    }
    runs
}

/// Axis-aligned box in angle coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct BoxSet {
    pub center: [f64; 4],
    pub half_sides: [f64; 4],
}

impl BoxSet {
    pub fn new(center: [f64; 4], half_sides: [f64; 4]) -> Result<Self, LabError> {
        if half_sides.iter().any(|h| !(*h > 0.0 && *h <= std::f64::consts::PI)) {
            return Err(LabError::InvalidParameter(format!("box half-sides {half_sides:?} outside (0, pi]")));
        }
        Ok(BoxSet { center, half_sides })
    }

    /// Smallest slack `half_side - |offset|` over the coordinates; positive
    /// inside.
    pub fn margin(&self, p: &TorusPoint<f64>) -> f64 {
        let a = p.angles();
        (0..4)
            .map(|k| {
                let d = (a[k] - self.center[k]).rem_euclid(std::f64::consts::TAU);
                self.half_sides[k] - d.min(std::f64::consts::TAU - d)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &TorusPoint<f64>) -> bool {
        self.margin(p) > 0.0
    }

    pub fn center_point(&self, bits: u32) -> Result<TorusPoint<f64>, LabError> {
        TorusPoint::from_angles(self.center, bits)
    }
}
