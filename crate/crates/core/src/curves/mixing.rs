//! Orbits from one box to another, found by crossing a good center curve
//! grown forward from the source with one grown backward from the target.
//!
//! The curves live in center leaves of the unperturbed map. Both are moved
//! into a common center leaf along strong leaves, where their images cross;
//! Newton's method then pins the crossing down to working precision. For a
//! perturbed map the unperturbed orbit is continued by multiple shooting,
//! and its distance from the unperturbed leaves is reported against a tube
//! of width `10 epsilon`.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::cones::ConeKind;
use crate::error::LabError;
use crate::mp::{Mp, MpWide, WIDE_FRAC};
use crate::real::Real;
use crate::rng::stream;
use crate::skew::{Direction, MapParams};
use crate::torus::{fiber_dist, FiberPoint, TorusPoint};

use super::center::{advance, cone_runs, extract_cone_subcurves, BoxSet, CenterCurve};
use super::good::{good_point_bits, persistent_good_point, GoodPoint};
use super::holonomy::{heteroclinic_base, BaseCrossing, HETEROCLINIC_RADIUS};
use super::leaf::{auto_depth, chart_bits, LeafChart};

#[derive(Clone, Debug, Serialize)]
pub struct MixingConfig {
    /// Sample spacing of the curves.
    pub delta: f64,
    /// Generations allowed for the forward curve to reach length `4 pi`.
    pub max_generations: u32,
    /// Leaf radius searched for the persistent good points.
    pub good_radius: f64,
    /// Longest piece kept between generations.
    pub piece_len: f64,
    /// Extra generations tried when a backward image is too short.
    pub reach: u32,
    /// Points at which the holonomy displacement is sampled.
    pub holonomy_samples: usize,
    /// Largest `max(|t|, |s|)` accepted for the shared leaf.
    pub leaf_radius: f64,
    pub newton_tol: f64,
    /// Shooting defect tolerance, divided by the growth over the whole orbit.
    pub shadow_tol: f64,
    pub fiber_tol: f64,
    pub saturation_samples: usize,
    pub seed: u64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        MixingConfig {
            delta: 0.1,
            max_generations: 8,
            good_radius: 0.1,
            piece_len: 3.0,
            reach: 3,
            holonomy_samples: 17,
            leaf_radius: 10.0,
            newton_tol: 1e-60,
            shadow_tol: 1e-12,
            fiber_tol: 1e-3,
            saturation_samples: 100,
            seed: 0,
        }
    }
}

/// Crossing of two fiber polylines, found on their lifts to the plane.
#[derive(Clone, Debug, Serialize)]
pub struct PolylineCrossing {
    /// Segment indices.
    pub a: usize,
    pub b: usize,
    /// Positions along the two segments, in `[0, 1]`.
    pub ua: f64,
    pub ub: f64,
    pub point: FiberPoint<f64>,
    /// The crossing sits on a segment end.
    pub tie: bool,
}

fn unwrap(points: &[FiberPoint<f64>]) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(points.len());
    let mut cur = [points[0].x, points[0].y];
    out.push(cur);
    for w in points.windows(2) {
        let d = w[1].diff(&w[0]);
        cur = [cur[0] + d[0], cur[1] + d[1]];
        out.push(cur);
    }
    out
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// All crossings of two polylines on the fiber torus. Each lifted segment
/// of `b` is tried against each of `a` under the nearby lattice shifts;
/// crossings at segment ends are reported once, flagged as ties.
pub fn polyline_crossings(a: &[FiberPoint<f64>], b: &[FiberPoint<f64>]) -> Vec<PolylineCrossing> {
    const END: f64 = 1e-12;
    if a.len() < 2 || b.len() < 2 {
        return vec![];
    }
    let (la, lb) = (unwrap(a), unwrap(b));
    let mut out: Vec<PolylineCrossing> = Vec::new();
    for i in 0..la.len() - 1 {
        let (p, p2) = (la[i], la[i + 1]);
        let r = [p2[0] - p[0], p2[1] - p[1]];
        for j in 0..lb.len() - 1 {
            let k0 = [((p[0] - lb[j][0]) / TAU).round(), ((p[1] - lb[j][1]) / TAU).round()];
            for dk in [[0.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0], [-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]] {
                let sh = [TAU * (k0[0] + dk[0]), TAU * (k0[1] + dk[1])];
                let q = [lb[j][0] + sh[0], lb[j][1] + sh[1]];
                let q2 = [lb[j + 1][0] + sh[0], lb[j + 1][1] + sh[1]];
                let s = [q2[0] - q[0], q2[1] - q[1]];
                let den = cross(r, s);
                if den == 0.0 {
                    continue;
                }
                let qp = [q[0] - p[0], q[1] - p[1]];
                let ua = cross(qp, s) / den;
                let ub = cross(qp, r) / den;
                if !(-END..=1.0 + END).contains(&ua) || !(-END..=1.0 + END).contains(&ub) {
                    continue;
                }
                let (ua, ub) = (ua.clamp(0.0, 1.0), ub.clamp(0.0, 1.0));
                let tie = !(END..=1.0 - END).contains(&ua) || !(END..=1.0 - END).contains(&ub);
                let point = FiberPoint::new(p[0] + ua * r[0], p[1] + ua * r[1]).reduced();
                if tie && out.iter().any(|c| c.tie && fiber_dist(&c.point, &point) < 1e-9) {
                    continue;
                }
                out.push(PolylineCrossing { a: i, b: j, ua, ub, point, tie });
            }
        }
    }
    out
}

/// Part of the orbit of one seed parameter that the pieces follow.
#[derive(Clone, Debug)]
struct Piece {
    curve: CenterCurve,
    /// Parameter of the tracked point.
    tracked: f64,
}

/// `|2N cos a + 2| >= theta + 1/theta`: one step keeps the cone of aperture
/// `theta` and expands it.
fn expands(n: f64, theta: f64, a: f64) -> bool {
    (2.0 * n * a.cos() + 2.0).abs() >= theta + 1.0 / theta
}

/// A cone run of `c` cut to at most `max_len` of arclength: the run through
/// `around` if it has one, otherwise the longest.
fn cut_run(c: &CenterCurve, kind: ConeKind, n: f64, theta: f64, around: Option<f64>, max_len: f64) -> Option<Piece> {
    let coord = |p: &FiberPoint<f64>| if kind == ConeKind::Horizontal { p.x } else { p.y };
    let runs = cone_runs(c, kind, theta, |p| expands(n, theta, coord(p)));
    let at = around.map(|t| c.nearest_index(t));
    let run = at
        .and_then(|i| runs.iter().find(|(lo, hi)| (*lo..=*hi).contains(&i)))
        .or_else(|| runs.iter().max_by(|x, y| c.slice(x.0, x.1).arclength.total_cmp(&c.slice(y.0, y.1).arclength)))?;
    let (lo, hi) = *run;
    if hi <= lo {
        return None;
    }
    let mut cum = vec![0.0];
    for w in c.samples[lo..=hi].windows(2) {
        cum.push(cum.last().unwrap() + fiber_dist(&w[0], &w[1]));
    }
    let total = *cum.last().unwrap();
    let centre = match at {
        Some(i) if (lo..=hi).contains(&i) => cum[i - lo],
        _ => 0.5 * total,
    };
    let (mut a, mut b) = (centre - 0.5 * max_len, centre + 0.5 * max_len);
    if a < 0.0 {
        b -= a;
        a = 0.0;
    }
    if b > total {
        a = (a - (b - total)).max(0.0);
        b = total;
    }
    let i0 = lo + cum.iter().position(|x| *x >= a).unwrap_or(0);
    let i1 = lo + cum.iter().rposition(|x| *x <= b).unwrap_or(hi - lo);
    if i1 <= i0 {
        return None;
    }
    let s = c.slice(i0, i1);
    let tracked = match at {
        Some(i) if (i0..=i1).contains(&i) => s.local_param(c.ts[i]),
        _ => 0.5,
    };
    Some(Piece { curve: s.reseeded(), tracked })
}

/// Longest cone subcurve of length at least `4 pi`, preferring the one
/// through `around`.
fn long_subcurve(c: &CenterCurve, kind: ConeKind, theta: f64, around: Option<f64>) -> Option<CenterCurve> {
    let subs = extract_cone_subcurves(c, kind, theta, 4.0 * PI);
    let hit = around.and_then(|t| subs.iter().find(|s| (s.range().0..=s.range().1).contains(&t)));
    hit.or_else(|| subs.iter().max_by(|x, y| x.arclength.total_cmp(&y.arclength))).map(|s| s.reseeded())
}

/// The side grown forward from the source box.
#[derive(Clone, Debug, Serialize)]
pub struct ForwardSide {
    pub good: GoodPoint,
    /// Generation at which the curve first has a horizontal subcurve of
    /// length `4 pi`.
    pub generation: u32,
    pub curve: CenterCurve,
    pub seed_length: f64,
}

/// Data shared by all target times: the forward curve and the chain of
/// nested backward pieces.
#[derive(Clone, Debug)]
pub struct MixingSetup {
    pub params: MapParams,
    /// The unperturbed map at the working precision.
    flat: MapParams,
    pub source: BoxSet,
    pub target: BoxSet,
    pub config: MixingConfig,
    pub forward: ForwardSide,
    pub backward_good: GoodPoint,
    /// `images[k]` is the full generation-`k` image of `pieces[k - 1]`.
    images: Vec<CenterCurve>,
    pieces: Vec<Piece>,
    theta: f64,
}

/// Length of the seed segments, `N^(-3/10)`, shortened to stay in `b`.
fn seed_length(n: f64, b: &BoxSet, p: &TorusPoint<f64>) -> f64 {
    n.powf(-0.3).min(2.0 * (b.margin(p) - 1e-9)).max(0.0)
}

impl MixingSetup {
    /// Grows the forward curve and prepares backward pieces up to
    /// generation `n_max`.
    pub fn new(params: &MapParams, source: &BoxSet, target: &BoxSet, n_max: u32, config: MixingConfig) -> Result<Self, LabError> {
        if config.holonomy_samples < 2 || !(config.delta > 0.0) {
            return Err(LabError::InvalidParameter("need delta > 0 and at least two holonomy samples".into()));
        }
        let mut flat = params.clone();
        flat.perturbation = None;
        let horizon = n_max + config.reach + 2;
        let bits = good_point_bits(&flat, horizon).max(params.bits).max(chart_bits(&flat, 8));
        let flat = flat.with_bits(bits)?;
        let theta = flat.n.powf(-0.6);
        let forward = grow_forward(&flat, source, &config, theta).map_err(|e| e.at("forward curve"))?;
        let anchor = target.center_point(bits)?;
        let backward_good = persistent_good_point(&flat, &anchor, Bundle::Ss, config.good_radius, horizon)
            .map_err(|e| e.at("backward good point"))?;
        if !target.contains(&backward_good.approx) {
            return Err(LabError::NoSubcurve("backward good point left the target".into()).at("backward good point"));
        }
        let q = backward_good.point.clone();
        let len = seed_length(flat.n, target, &backward_good.approx);
        let seed = CenterCurve::through(&flat, &q, [0.0, 1.0], len, Direction::Backward, config.delta)?;
        let mut setup = MixingSetup {
            params: params.clone(),
            flat,
            source: source.clone(),
            target: target.clone(),
            config,
            forward,
            backward_good,
            images: vec![seed.clone()],
            pieces: vec![Piece { curve: seed, tracked: 0.5 }],
            theta,
        };
        setup.extend_chain(n_max).map_err(|e| e.at("backward chain"))?;
        Ok(setup)
    }

    pub fn flat_params(&self) -> &MapParams {
        &self.flat
    }

    /// Generations available on the backward side.
    pub fn chain_len(&self) -> u32 {
        self.pieces.len() as u32 - 1
    }

    fn extend_chain(&mut self, n: u32) -> Result<(), LabError> {
        while self.chain_len() < n {
            let last = self.pieces.last().expect("chain starts with the seed");
            let img = advance(&self.flat, &last.curve, 1, self.config.delta)?;
            let k = self.chain_len() + 1;
            let piece = cut_run(&img, ConeKind::Vertical, self.flat.n, self.theta, Some(last.tracked), self.config.piece_len)
                .ok_or_else(|| LabError::NoSubcurve(format!("no expanding vertical run at generation {k}")))?;
            self.images.push(img);
            self.pieces.push(piece);
        }
        Ok(())
    }

    /// A vertical curve of length `4 pi` in the generation-`n` image of the
    /// target seed, grown from the nested piece `j` generations earlier for
    /// the smallest `j` that works.
    pub fn backward_curve(&mut self, n: u32) -> Result<CenterCurve, LabError> {
        if n == 0 {
            return Err(LabError::InvalidParameter("target time must be positive".into()));
        }
        self.extend_chain(n)?;
        let (nf, theta) = (self.flat.n, self.theta);
        for j in 1..=self.config.reach.min(n) {
            let mut c = self.images[(n - j + 1) as usize].clone();
            let mut ok = true;
            for _ in 1..j {
                match cut_run(&c, ConeKind::Vertical, nf, theta, None, self.config.piece_len) {
                    Some(p) => c = advance(&self.flat, &p.curve, 1, self.config.delta)?,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                if let Some(s) = long_subcurve(&c, ConeKind::Vertical, theta, None) {
                    return Ok(s);
                }
            }
        }
        Err(LabError::NoSubcurve(format!("no vertical curve of length 4 pi at generation {n}")))
    }

    /// First target time with a backward curve, no earlier than the time
    /// from which the backward good point stays good.
    pub fn first_time(&mut self) -> Result<u32, LabError> {
        let start = self.backward_good.first_good.max(1);
        for n in start..start + 4 * self.config.reach + 8 {
            if self.backward_curve(n).is_ok() {
                return Ok(n);
            }
        }
        Err(LabError::NoSubcurve("no backward curve reached length 4 pi".into()).at("backward curve"))
    }
}

fn grow_forward(flat: &MapParams, source: &BoxSet, cfg: &MixingConfig, theta: f64) -> Result<ForwardSide, LabError> {
    let anchor = source.center_point(flat.bits)?;
    let good = persistent_good_point(flat, &anchor, Bundle::Uu, cfg.good_radius, cfg.max_generations + 2)?;
    if !source.contains(&good.approx) {
        return Err(LabError::NoSubcurve("forward good point left the source".into()));
    }
    let len = seed_length(flat.n, source, &good.approx);
    let seed = CenterCurve::through(flat, &good.point, [1.0, 0.0], len, Direction::Forward, cfg.delta)?;
    let mut piece = Piece { curve: seed, tracked: 0.5 };
    for generation in 1..=cfg.max_generations {
        let img = advance(flat, &piece.curve, 1, cfg.delta)?;
        if let Some(curve) = long_subcurve(&img, ConeKind::Horizontal, theta, Some(piece.tracked)) {
            return Ok(ForwardSide { good, generation, curve, seed_length: len });
        }
        piece = cut_run(&img, ConeKind::Horizontal, flat.n, theta, Some(piece.tracked), cfg.piece_len)
            .ok_or_else(|| LabError::NoSubcurve(format!("no expanding horizontal run at generation {generation}")))?;
    }
    Err(LabError::NoSubcurve(format!("no horizontal curve of length 4 pi within {} generations", cfg.max_generations)))
}

/// Continuation of the unperturbed orbit to a perturbed map.
#[derive(Clone, Debug, Serialize)]
pub struct TubeReport {
    pub epsilon: f64,
    /// `10 epsilon`.
    pub width: f64,
    /// Largest base distance of the perturbed orbit from the unperturbed one.
    pub deviation: f64,
    pub within: bool,
    pub iterations: u32,
    /// Largest one-step defect left by the shooting.
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingOrbit {
    /// Forward time from the crossing to the target.
    pub n: u32,
    /// Backward time from the crossing to the source.
    pub n_source: u32,
    /// The crossing point.
    pub point: TorusPoint<f64>,
    /// Curve parameters of the crossing, forward curve first.
    pub tau: [f64; 2],
    /// Leaf parameters of the shared center leaf.
    pub crossing: BaseCrossing,
    pub candidates: usize,
    pub ties: usize,
    pub newton_iterations: u32,
    pub newton_residual: f64,
    /// Box margins of the direct iterates (positive inside).
    pub source_margin: f64,
    pub target_margin: f64,
    /// Distances of the direct iterates from the seed points they should
    /// return to.
    pub source_residual: f64,
    pub target_residual: f64,
    pub tube: Option<TubeReport>,
    pub verified: bool,
}

/// Strong leaf points over the two curves, moved into the shared leaf.
struct LeafMaps<'a> {
    hp: MapParams,
    plus: &'a CenterCurve,
    minus: &'a CenterCurve,
    depth: [u32; 2],
    leaf: [Mp; 2],
}

impl LeafMaps<'_> {
    fn plus_point(&self, tau: Mp) -> Result<TorusPoint<Mp>, LabError> {
        let a = self.plus.point(&self.hp, tau);
        Ok(LeafChart::new(&self.hp, &a, Bundle::Uu, self.depth[0])?.point(&self.hp, self.leaf[0]))
    }

    fn minus_point(&self, tau: Mp) -> Result<TorusPoint<Mp>, LabError> {
        let a = self.minus.point(&self.hp, tau);
        Ok(LeafChart::new(&self.hp, &a, Bundle::Ss, self.depth[1])?.point(&self.hp, self.leaf[1]))
    }

    fn residual(&self, tau: [Mp; 2]) -> Result<[Mp; 2], LabError> {
        Ok(self.plus_point(tau[0])?.fiber.diff(&self.minus_point(tau[1])?.fiber))
    }

    /// Curve samples shifted by the holonomy displacement, interpolated from
    /// `k` evaluations.
    fn moved(&self, c: &CenterCurve, plus: bool, k: usize) -> Result<Vec<FiberPoint<f64>>, LabError> {
        let mut knots = Vec::with_capacity(k);
        for i in 0..k {
            let t = i as f64 / (k - 1) as f64;
            let on = c.point(&self.hp, Mp::of(t)).fiber;
            let moved = if plus { self.plus_point(Mp::of(t))? } else { self.minus_point(Mp::of(t))? }.fiber;
            let d = moved.diff(&on);
            knots.push((t, [d[0].hi(), d[1].hi()]));
        }
        Ok(c.ts
            .iter()
            .zip(&c.samples)
            .map(|(t, p)| {
                let j = ((t * (k - 1) as f64).floor() as usize).min(k - 2);
                let (t0, d0) = knots[j];
                let (t1, d1) = knots[j + 1];
                let w = (t - t0) / (t1 - t0);
                FiberPoint::new(p.x + d0[0] + w * (d1[0] - d0[0]), p.y + d0[1] + w * (d1[1] - d0[1])).reduced()
            })
            .collect())
    }
}

/// Parameter of a polyline crossing along the curve's samples.
fn crossing_param(c: &CenterCurve, seg: usize, u: f64) -> f64 {
    c.ts[seg] + u * (c.ts[seg + 1] - c.ts[seg])
}

/// Newton on the fiber mismatch of the two leaf points in the curve
/// parameters, with a finite-difference Jacobian.
fn newton(maps: &LeafMaps, start: [f64; 2], tol: f64) -> Result<([Mp; 2], u32, f64), LabError> {
    let h = Mp::of(1e-30);
    let mut tau = [Mp::of(start[0]), Mp::of(start[1])];
    for it in 0..40 {
        let f = maps.residual(tau)?;
        let size = f[0].abs().max(f[1].abs()).hi();
        if size < tol {
            return Ok((tau, it, size));
        }
        let fa = maps.residual([tau[0] + h, tau[1]])?;
        let fb = maps.residual([tau[0], tau[1] + h])?;
        let col = |g: [Mp; 2]| [((g[0] - f[0]) / h).hi(), ((g[1] - f[1]) / h).hi()];
        let (ca, cb) = (col(fa), col(fb));
        let det = ca[0] * cb[1] - cb[0] * ca[1];
        if det == 0.0 || !det.is_finite() {
            return Err(LabError::NoIntersection);
        }
        let (r0, r1) = (f[0].hi(), f[1].hi());
        // f64 solve of the correction; the residual stays in full precision
        let d0 = (cb[1] * r0 - cb[0] * r1) / det;
        let d1 = (ca[0] * r1 - ca[1] * r0) / det;
        tau = [tau[0] - Mp::of(d0), tau[1] - Mp::of(d1)];
        if tau.iter().any(|t| !(-0.05..=1.05).contains(&t.hi())) {
            return Err(LabError::NoIntersection);
        }
    }
    Err(LabError::NotConverged { gap: maps.residual(tau).map(|f| f[0].abs().max(f[1].abs()).hi()).unwrap_or(f64::NAN) })
}

fn gap<T: Real>(a: &TorusPoint<T>, b: &TorusPoint<T>) -> f64 {
    let d = a.diff(b);
    d.iter().map(|x| x.hi() * x.hi()).sum::<f64>().sqrt()
}

impl MixingSetup {
    /// The orbit that leaves the source and is in the target `n` steps after
    /// the crossing.
    pub fn orbit(&mut self, n: u32) -> Result<MixingOrbit, LabError> {
        let minus = self.backward_curve(n).map_err(|e| e.at("backward curve"))?;
        let plus = self.forward.curve.clone();
        let crossing = heteroclinic_base(&self.flat, &plus.leaf, &minus.leaf, self.config.leaf_radius)
            .map_err(|e| e.at("shared leaf"))?;
        let depth = [auto_depth(&self.flat, crossing.t.abs()), auto_depth(&self.flat, crossing.s.abs())];
        let maps = LeafMaps { hp: self.flat.clone(), plus: &plus, minus: &minus, depth, leaf: crossing.exact };
        let k = self.config.holonomy_samples;
        let a = maps.moved(&plus, true, k).map_err(|e| e.at("holonomy"))?;
        let b = maps.moved(&minus, false, k).map_err(|e| e.at("holonomy"))?;
        let found = polyline_crossings(&a, &b);
        let ties = found.iter().filter(|c| c.tie).count();
        let mut solved = None;
        let mut last = LabError::NoIntersection;
        for c in &found {
            let start = [crossing_param(&plus, c.a, c.ua), crossing_param(&minus, c.b, c.ub)];
            match newton(&maps, start, self.config.newton_tol) {
                Ok(s) => {
                    solved = Some(s);
                    break;
                }
                Err(e) => last = e,
            }
        }
        let (tau, iterations, residual) = solved.ok_or_else(|| last.at("intersection"))?;
        let m = maps.minus_point(tau[1])?;
        let start = plus.seed_point(tau[0]);
        let end = minus.seed_point(tau[1]);
        let g = self.forward.generation;
        let mut report = MixingOrbit {
            n,
            n_source: g,
            point: m.to_f64(),
            tau: [tau[0].hi(), tau[1].hi()],
            crossing,
            candidates: found.len(),
            ties,
            newton_iterations: iterations,
            newton_residual: residual,
            source_margin: 0.0,
            target_margin: 0.0,
            source_residual: 0.0,
            target_residual: 0.0,
            tube: None,
            verified: false,
        };
        match &self.params.perturbation {
            None => {
                let back = self.flat.iterate(&m, Direction::Backward, g);
                let fwd = self.flat.iterate(&m, Direction::Forward, n);
                self.fill(&mut report, &back.to_f64(), &fwd.to_f64(), gap(&back, &start), gap(&fwd, &end));
            }
            Some(pert) => {
                let eps = pert.epsilon;
                self.continue_perturbed(&mut report, &m, &plus, &minus, tau, eps).map_err(|e| e.at("shooting"))?;
            }
        }
        Ok(report)
    }

    fn fill(&self, r: &mut MixingOrbit, back: &TorusPoint<f64>, fwd: &TorusPoint<f64>, back_gap: f64, fwd_gap: f64) {
        r.source_margin = self.source.margin(back);
        r.target_margin = self.target.margin(fwd);
        r.source_residual = back_gap;
        r.target_residual = fwd_gap;
        let tube_ok = r.tube.as_ref().is_none_or(|t| t.within);
        r.verified = r.source_margin > 0.0
            && r.target_margin > 0.0
            && back_gap < self.config.fiber_tol
            && fwd_gap < self.config.fiber_tol
            && tube_ok;
    }
}

/// Unknowns of the shooting problem: the interior orbit points and, at each
/// end, a curve parameter and a base offset along the leaf that contracts
/// towards the crossing.
struct Shooting<'a> {
    params: &'a MapParams,
    plus: CenterCurve<MpWide>,
    minus: CenterCurve<MpWide>,
    e_u: [MpWide; 2],
    e_s: [MpWide; 2],
}

struct ShootState {
    ends: [[MpWide; 2]; 2],
    interior: Vec<TorusPoint<MpWide>>,
}

impl Shooting<'_> {
    fn end(&self, c: &CenterCurve<MpWide>, e: &[MpWide; 2], v: &[MpWide; 2]) -> TorusPoint<MpWide> {
        let mut p = c.seed_point(v[0]);
        p.base = p.base.shifted_by([v[1] * e[0], v[1] * e[1]]);
        p
    }

    fn orbit(&self, st: &ShootState) -> Vec<TorusPoint<MpWide>> {
        let mut out = vec![self.end(&self.plus, &self.e_u, &st.ends[0])];
        out.extend(st.interior.iter().cloned());
        out.push(self.end(&self.minus, &self.e_s, &st.ends[1]));
        out
    }

    fn defects(&self, orbit: &[TorusPoint<MpWide>]) -> Vec<[MpWide; 4]> {
        orbit.windows(2).map(|w| self.params.forward(&w[0]).diff(&w[1])).collect()
    }

    /// Newton with `f64` linear algebra on full-precision defects.
    fn solve(&self, mut st: ShootState, tol: f64) -> Result<(ShootState, u32, f64), LabError> {
        let k = st.interior.len() + 1;
        let dim = 4 * k;
        let col = |c: &CenterCurve<MpWide>| {
            let d = [c.seed[1].x - c.seed[0].x, c.seed[1].y - c.seed[0].y];
            [d[0].hi(), d[1].hi()]
        };
        let (dp, dm) = (col(&self.plus), col(&self.minus));
        let eu = [self.e_u[0].hi(), self.e_u[1].hi()];
        let es = [self.e_s[0].hi(), self.e_s[1].hi()];
        for it in 0..60 {
            let orbit = self.orbit(&st);
            let defects = self.defects(&orbit);
            let size = defects.iter().flatten().map(|d| d.abs().hi()).fold(0.0, f64::max);
            if size < tol {
                return Ok((st, it, size));
            }
            if !size.is_finite() || size > 1.0 {
                return Err(LabError::NotConverged { gap: size });
            }
            let mut a = DMatrix::<f64>::zeros(dim, dim);
            let mut rhs = DVector::<f64>::zeros(dim);
            for (i, d) in defects.iter().enumerate() {
                let j = self.params.derivative(&orbit[i].to_f64(), Direction::Forward).ambient();
                for r in 0..4 {
                    rhs[4 * i + r] = -d[r].hi();
                    if i == 0 {
                        a[(r, 0)] = j[(r, 0)] * dp[0] + j[(r, 1)] * dp[1];
                        a[(r, 1)] = j[(r, 2)] * eu[0] + j[(r, 3)] * eu[1];
                    } else {
                        for c in 0..4 {
                            a[(4 * i + r, 2 + 4 * (i - 1) + c)] = j[(r, c)];
                        }
                    }
                }
                if i + 1 < k {
                    for r in 0..4 {
                        a[(4 * i + r, 2 + 4 * i + r)] = -1.0;
                    }
                } else {
                    let row = 4 * i;
                    a[(row, dim - 2)] = -dm[0];
                    a[(row + 1, dim - 2)] = -dm[1];
                    a[(row + 2, dim - 1)] = -es[0];
                    a[(row + 3, dim - 1)] = -es[1];
                }
            }
            let x = a.lu().solve(&rhs).ok_or(LabError::NotConverged { gap: size })?;
            let w = |v: f64| MpWide::of(v);
            st.ends[0] = [st.ends[0][0] + w(x[0]), st.ends[0][1] + w(x[1])];
            st.ends[1] = [st.ends[1][0] + w(x[dim - 2]), st.ends[1][1] + w(x[dim - 1])];
            for (i, p) in st.interior.iter_mut().enumerate() {
                let o = 2 + 4 * i;
                p.fiber = FiberPoint::new(p.fiber.x + w(x[o]), p.fiber.y + w(x[o + 1])).reduced();
                p.base = p.base.shifted_by([w(x[o + 2]), w(x[o + 3])]);
            }
        }
        Err(LabError::NotConverged { gap: f64::NAN })
    }
}

/// Base bits for the shooting at `steps` total steps.
fn shooting_bits(params: &MapParams, steps: u32) -> Result<u32, LabError> {
    let need = (params.two_n_floor * steps) as f64 * params.matrix.mu.log2() + 64.0;
    if need > WIDE_FRAC as f64 {
        return Err(LabError::PrecisionExhausted { generation: steps });
    }
    Ok(WIDE_FRAC + 128)
}

impl MixingSetup {
    fn continue_perturbed(
        &self,
        report: &mut MixingOrbit,
        m: &TorusPoint<Mp>,
        plus: &CenterCurve,
        minus: &CenterCurve,
        tau: [Mp; 2],
        epsilon: f64,
    ) -> Result<(), LabError> {
        let (g, n) = (report.n_source, report.n);
        let bits = shooting_bits(&self.flat, g + n)?.max(self.flat.bits);
        let params = self.params.with_bits(bits)?;
        let flat = self.flat.with_bits(bits)?;
        let lift = |p: &TorusPoint<Mp>| TorusPoint { fiber: p.fiber.cast::<MpWide>(), base: p.base.with_bits(bits) };
        let start = lift(&self.flat.iterate(m, Direction::Backward, g));
        let mut orbit0 = vec![start];
        for _ in 0..g + n {
            let next = flat.forward(orbit0.last().unwrap());
            orbit0.push(next);
        }
        let widen = |c: &CenterCurve| {
            let mut w = c.convert::<MpWide>();
            w.base = w.base.with_bits(bits);
            w
        };
        let (es, eu) = params.matrix.eigvecs::<MpWide>();
        let sh = Shooting { params: &params, plus: widen(plus), minus: widen(minus), e_u: eu, e_s: es };
        // end offsets of the unperturbed orbit from its seed points
        let offset = |p: &TorusPoint<MpWide>, c: &CenterCurve<MpWide>, t: Mp, unstable: bool| {
            let q = c.seed_point(t.convert());
            let o = params.matrix.to_eigen_in(p.base.diff_angles::<MpWide>(&q.base));
            [t.convert::<MpWide>(), if unstable { o[1] } else { o[0] }]
        };
        let k = (g + n) as usize;
        let st = ShootState {
            ends: [offset(&orbit0[0], &sh.plus, tau[0], true), offset(&orbit0[k], &sh.minus, tau[1], false)],
            interior: orbit0[1..k].to_vec(),
        };
        // a defect grows by mu^[2N] per step of direct iteration
        let growth = (self.flat.two_n_floor * (g + n)) as f64 * self.flat.matrix.mu.log10();
        let tol = self.config.shadow_tol * 10f64.powf(-growth);
        let (st, iterations, defect) = sh.solve(st, tol)?;
        let orbit = sh.orbit(&st);
        let deviation = orbit
            .iter()
            .zip(&orbit0)
            .map(|(a, b)| {
                let d = a.base.diff_angles::<f64>(&b.base);
                d[0].hypot(d[1])
            })
            .fold(0.0, f64::max);
        let width = 10.0 * epsilon;
        report.tube = Some(TubeReport { epsilon, width, deviation, within: deviation <= width, iterations, defect });
        let mw = &orbit[g as usize];
        report.point = mw.to_f64();
        let back = params.iterate(mw, Direction::Backward, g);
        let fwd = params.iterate(mw, Direction::Forward, n);
        self.fill(report, &back.to_f64(), &fwd.to_f64(), gap(&back, &orbit[0]), gap(&fwd, &orbit[k]));
        Ok(())
    }

    /// Strong unstable discs of radius `radius` around random points of the
    /// forward curve, followed back to the source.
    pub fn saturation(&self, radius: f64) -> Result<SaturationReport, LabError> {
        let c = &self.forward.curve;
        let g = self.forward.generation;
        let depth = auto_depth(&self.flat, radius);
        let hp = self.flat.with_bits(self.flat.bits.max(chart_bits(&self.flat, depth)))?;
        let mut inside = 0;
        let mut worst = 0.0f64;
        let mut min_margin = f64::INFINITY;
        let n = self.config.saturation_samples;
        for i in 0..n {
            let mut rng = stream(self.config.seed, i as u64);
            let tau = rng.gen_range(0.0..=1.0);
            let t = rng.gen_range(-radius..=radius);
            let a = c.point(&hp, Mp::of(tau));
            let y = LeafChart::new(&hp, &a, Bundle::Uu, depth)?.point(&hp, Mp::of(t));
            let back = hp.iterate(&y, Direction::Backward, g);
            let dev = gap(&back, &c.seed_point(Mp::of(tau)));
            let margin = self.source.margin(&back.to_f64());
            worst = worst.max(dev);
            min_margin = min_margin.min(margin);
            if margin > 0.0 && dev < self.config.fiber_tol {
                inside += 1;
            }
        }
        Ok(SaturationReport { radius, samples: n, inside, max_deviation: worst, min_margin, pass: inside == n })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SaturationReport {
    pub radius: f64,
    pub samples: usize,
    pub inside: usize,
    pub max_deviation: f64,
    pub min_margin: f64,
    pub pass: bool,
}

/// One mixing orbit for target time `n`.
pub fn mixing_intersection(
    params: &MapParams,
    source: &BoxSet,
    target: &BoxSet,
    n: u32,
    config: MixingConfig,
) -> Result<MixingOrbit, LabError> {
    MixingSetup::new(params, source, target, n, config)?.orbit(n)
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingSweep {
    pub n0: u32,
    pub span: u32,
    pub orbits: Vec<MixingOrbit>,
    /// Target times that failed, with the reason.
    pub failures: Vec<(u32, String)>,
    pub saturation: SaturationReport,
    pub all_verified: bool,
}

/// Mixing orbits for every target time in `n0..=n0 + span`, where `n0` is
/// the first time with a backward curve.
pub fn mixing_sweep(params: &MapParams, source: &BoxSet, target: &BoxSet, span: u32, config: MixingConfig) -> Result<MixingSweep, LabError> {
    let mut setup = MixingSetup::new(params, source, target, 1, config)?;
    let n0 = setup.first_time()?;
    let mut orbits = Vec::new();
    let mut failures = Vec::new();
    for n in n0..=n0 + span {
        match setup.orbit(n) {
            Ok(o) => {
                if !o.verified {
                    failures.push((n, "verification failed".to_string()));
                }
                orbits.push(o);
            }
            Err(e) => failures.push((n, e.to_string())),
        }
    }
    let saturation = setup.saturation(HETEROCLINIC_RADIUS)?;
    Ok(MixingSweep { n0, span, all_verified: failures.is_empty() && saturation.pass, orbits, failures, saturation })
}

#[cfg(test)]
mod tests;
