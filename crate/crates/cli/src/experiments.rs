//! One function per subcommand: run the library operation, collect
//! measurements with their tolerances and pass/fail verdicts.

use std::f64::consts::PI;

use rand::Rng;
use skewlab::bundle::{default_iterations, invariance_defect, invariant_direction, line_angle, lyapunov_spectrum};
use skewlab::bundle::{transversality_check_with, Bundle};
use skewlab::cones::{cone_invariance_sweep_with, ConeKind, ConeSpec};
use skewlab::curves::good::{good_fraction_with, persistent_good_point};
use skewlab::curves::holonomy::{heteroclinic_center, holonomy_defect_with, standard_pair, HETEROCLINIC_RADIUS};
use skewlab::curves::{extract_cone_subcurves, iterate_center_curve, mixing_sweep, CenterCurve, MixingConfig};
use skewlab::par::map_indices;
use skewlab::rng::{random_point, stream};
use skewlab::{torus::torus_dist, Direction, LabError, MapParams, Mp, TorusPoint};

use crate::config::RunConfig;
use crate::record::{Outcome, Table};

pub const NAMES: [&str; 11] = [
    "orbit",
    "lyapunov",
    "cones",
    "bundle",
    "pinch",
    "good-fraction",
    "good-point",
    "curve-grow",
    "heteroclinic",
    "holonomy",
    "mix",
];

const DEFAULT_POINT: [f64; 4] = [1.0, 2.0, 0.5, 1.5];

pub fn run(name: &str, c: &RunConfig) -> Result<Outcome, LabError> {
    let p = c.params().map_err(|e| LabError::InvalidParameter(e.to_string()))?;
    match name {
        "orbit" => orbit(c, &p),
        "lyapunov" => lyapunov(c, &p),
        "cones" => cones(c, &p),
        "bundle" => bundle(c, &p),
        "pinch" => pinch(c, &p),
        "good-fraction" => fraction(c, &p),
        "good-point" => good_point(c, &p),
        "curve-grow" => curve_grow(c, &p),
        "heteroclinic" => heteroclinic(c, &p),
        "holonomy" => holonomy(c, &p),
        "mix" => mix(c, &p),
        _ => Err(LabError::InvalidParameter(format!("unknown experiment {name}"))),
    }
}

fn point(c: &RunConfig, p: &MapParams) -> Result<TorusPoint<f64>, LabError> {
    match c.point {
        Some(a) => TorusPoint::from_angles(a, p.bits),
        None => Ok(TorusPoint::from_angles(DEFAULT_POINT, p.bits)?),
    }
}

fn random_or_given(c: &RunConfig, p: &MapParams) -> Result<TorusPoint<f64>, LabError> {
    match c.point {
        Some(a) => TorusPoint::from_angles(a, p.bits),
        None => Ok(random_point(&mut stream(c.seed, u64::MAX - 1), p.bits)),
    }
}

fn orbit(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let steps = c.steps.or(c.horizon).unwrap_or(100);
    let start = point(c, p)?;
    let mut table = Table::new(&["step", "x", "y", "z", "w"]);
    let mut m = start.clone();
    let mut worst = 0.0f64;
    for k in 0..=steps {
        let a = m.angles();
        table.rows.push(vec![k as f64, a[0], a[1], a[2], a[3]]);
        if k == steps {
            break;
        }
        let next = p.forward(&m);
        worst = worst.max(torus_dist(&p.inverse(&next), &m));
        m = next;
    }
    let mut back = m.clone();
    for _ in 0..steps {
        back = p.inverse(&back);
    }
    let exact = back.base == start.base;
    let tol = c.tol("roundtrip", 1e-9);
    let mut o = Outcome::default();
    o.judged("one_step_roundtrip", worst, tol)
        .value("steps", steps as f64)
        .value("base_roundtrip_exact", f64::from(u8::from(exact)))
        .verdict("base_roundtrip_exact", exact)
        .verdict("one_step_roundtrip", worst < tol)
        .report(&m);
    o.table = Some(table);
    Ok(o)
}

fn lyapunov(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let horizon = c.horizon.unwrap_or(10_000);
    let n = c.samples.unwrap_or(10);
    let reports = map_indices(c.exec(), n, |i| {
        let m = match (i, c.point) {
            (0, Some(a)) => TorusPoint::from_angles(a, p.bits)?,
            _ => random_point(&mut stream(c.seed, i as u64), p.bits),
        };
        lyapunov_spectrum(p, &m, horizon)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let extreme = p.two_n_floor as f64 * p.matrix.mu.ln();
    let (te, ts) = (c.tol("extreme", 1e-3), c.tol("sum_defect", 1e-6));
    let off = reports
        .iter()
        .map(|r| (r.exponents[0] - extreme).abs().max((r.exponents[3] + extreme).abs()))
        .fold(0.0, f64::max);
    let sum = reports.iter().map(|r| r.sum_defect).fold(0.0, f64::max);
    let mean = |k: usize| reports.iter().map(|r| r.exponents[k]).sum::<f64>() / n as f64;
    let mut table = Table::new(&["sample", "chi1", "chi2", "chi3", "chi4", "sum_defect"]);
    for (i, r) in reports.iter().enumerate() {
        let e = r.exponents;
        table.rows.push(vec![i as f64, e[0], e[1], e[2], e[3], r.sum_defect]);
    }
    let mut o = Outcome::default();
    o.value("analytic_extreme", extreme)
        .judged("extreme_error", off, te)
        .judged("sum_defect", sum, ts)
        .value("mean_chi1", mean(0))
        .value("mean_chi2", mean(1))
        .value("mean_chi3", mean(2))
        .value("mean_chi4", mean(3))
        .verdict("extremes", off < te)
        .verdict("volume", sum < ts)
        .report(&reports);
    o.table = Some(table);
    Ok(o)
}

fn cones(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let alpha = c.tol("alpha", 0.1);
    let n = c.samples.unwrap_or(10_000);
    let mut o = Outcome::default();
    let mut reports = Vec::new();
    for (name, kind) in [("stable", ConeKind::Stable), ("unstable", ConeKind::Unstable)] {
        let r = cone_invariance_sweep_with(c.exec(), p, ConeSpec { kind, size: alpha }, n, c.seed)?;
        o.judged(&format!("{name}_worst_ratio"), r.worst_ratio, alpha).verdict(name, r.pass);
        reports.push(r);
    }
    o.report(&reports);
    Ok(o)
}

fn bundle(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let m = point(c, p)?;
    let it = c.horizon.unwrap_or_else(|| default_iterations(p.n));
    let uu = invariant_direction(p, &m, Bundle::Uu, it).map_err(|e| e.at("uu direction"))?;
    let ss = invariant_direction(p, &m, Bundle::Ss, it).map_err(|e| e.at("ss direction"))?;
    let tol = c.tol("invariance", 1e-6);
    let mut o = Outcome::default();
    o.value("uu_gap", uu.convergence_gap)
        .value("ss_gap", ss.convergence_gap)
        .value("angle", line_angle(&uu.vector, &ss.vector));
    if p.is_perturbed() {
        o.verdict("converged", true);
    } else {
        let d = invariance_defect(p, &m)?;
        o.judged("invariance_defect", d, tol).verdict("invariance", d < tol);
    }
    o.report(&[uu, ss]);
    Ok(o)
}

fn pinch(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let r = transversality_check_with(c.exec(), p, c.samples.unwrap_or(1000), c.seed)?;
    let half = 3.0 * r.lambda_n;
    let mut o = Outcome::default();
    o.value("lambda_n", r.lambda_n)
        .judged("uu_min_offset", r.unstable.min_ratio - r.unstable.center, half)
        .judged("uu_max_offset", r.unstable.max_ratio - r.unstable.center, half)
        .judged("ss_min_offset", r.stable.min_ratio - r.stable.center, half)
        .judged("ss_max_offset", r.stable.max_ratio - r.stable.center, half)
        .value("uu_band_lo", r.unstable.band_lo)
        .value("uu_band_hi", r.unstable.band_hi)
        .value("min_angle", r.min_angle)
        .verdict("uu_band", r.unstable.failures == 0)
        .verdict("ss_band", r.stable.failures == 0)
        .report(&r);
    Ok(o)
}

fn fraction(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let m = random_or_given(c, p)?;
    let radius = c.radius.unwrap_or(1.0);
    let steps = c.steps.unwrap_or(1);
    let r = good_fraction_with(c.exec(), p, &m, radius, steps, c.samples.unwrap_or(10_000), c.seed)?;
    let tol = c.tol("fraction", 0.05);
    let mut o = Outcome::default();
    o.judged("fraction", r.fraction, tol)
        .value("expected", r.expected)
        .value("lower_bound", r.lower_bound)
        .value("image_length", r.image_length)
        .verdict("equidistribution", (r.fraction - r.expected).abs() <= tol)
        .verdict("lower_bound", r.lower_bound_vacuous || r.fraction >= r.lower_bound)
        .report(&r);
    Ok(o)
}

fn good_point(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let m = random_or_given(c, p)?;
    let g = persistent_good_point(p, &m, Bundle::Uu, c.radius.unwrap_or(0.1), c.horizon.unwrap_or(20))?;
    let mut o = Outcome::default();
    o.value("first_good", g.first_good as f64)
        .judged("min_margin", g.min_margin, 0.0)
        .value("offset", g.offset)
        .value("corrections", g.corrections as f64)
        .value("bits", g.bits as f64)
        .verdict("persistent", g.min_margin >= 0.0)
        .report(&g);
    Ok(o)
}

fn curve_grow(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    if p.is_perturbed() {
        return Err(LabError::PreconditionViolated("curve growth uses the unperturbed map".into()));
    }
    let m = random_or_given(c, p)?;
    let g = persistent_good_point(p, &m, Bundle::Uu, 0.1, c.horizon.unwrap_or(20)).map_err(|e| e.at("good point"))?;
    let hp = p.with_bits(g.bits)?;
    let center = hp.iterate(&g.point, Direction::Forward, g.first_good);
    let theta = p.n.powf(-0.6);
    let len = c.radius.unwrap_or_else(|| p.n.powf(-0.3));
    let delta = c.tol("delta", 0.02);
    let seg = CenterCurve::<Mp>::through(&hp, &center, [1.0, 0.0], len, Direction::Forward, delta)?;
    let steps = c.steps.unwrap_or(1).max(1);
    let grow = |d: f64| -> Result<(f64, CenterCurve<Mp>), LabError> {
        let img = iterate_center_curve(&hp, &seg, steps, d)?;
        let best = extract_cone_subcurves(&img, ConeKind::Horizontal, theta, 0.0)
            .into_iter()
            .map(|s| s.arclength)
            .fold(0.0, f64::max);
        Ok((best, img))
    };
    let (a, img) = grow(delta).map_err(|e| e.at("image"))?;
    let (b, _) = grow(delta / 2.0).map_err(|e| e.at("halved image"))?;
    let rel = if b > 0.0 { (a - b).abs() / b } else { f64::INFINITY };
    let th = c.tol("halving", 0.01);
    let mut table = Table::new(&["t", "x", "y"]);
    for (t, s) in img.ts.iter().zip(&img.samples) {
        table.rows.push(vec![*t, s.x, s.y]);
    }
    let mut o = Outcome::default();
    o.value("seed_length", len)
        .value("start_time", g.first_good as f64)
        .judged("horizontal_length", b, 4.0 * PI)
        .judged("halving_change", rel, th)
        .value("image_length", img.arclength)
        .verdict("reaches_4pi", b >= 4.0 * PI)
        .verdict("self_consistent", rel < th)
        .report(&g);
    o.table = Some(table);
    Ok(o)
}

fn heteroclinic(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let a = point(c, p)?;
    let q = random_point(&mut stream(c.seed, 0), p.bits);
    let h = heteroclinic_center(p, &a, &q, c.radius.unwrap_or(HETEROCLINIC_RADIUS))?;
    let tol = c.tol("residual", 1e-9);
    let mut o = Outcome::default();
    o.value("t", h.crossing.t)
        .value("s", h.crossing.s)
        .judged("crossing_residual", h.crossing_residual, tol)
        .judged("return_residual", h.return_residual, tol)
        .verdict("crossing", h.crossing_residual < tol)
        .verdict("return", h.return_residual < tol)
        .report(&h);
    Ok(o)
}

fn holonomy(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let (a, b) = standard_pair(p, Bundle::Ss, c.radius.unwrap_or(1.0));
    let d = holonomy_defect_with(c.exec(), p, &a, &b, Bundle::Ss, c.grid.unwrap_or(20))?;
    let tol = c.tol("holonomy", 0.1);
    let mut o = Outcome::default();
    o.judged("sup", d.sup, tol)
        .value("mean", d.mean)
        .judged("sup_vs_bound", d.sup, d.bound)
        .value("alpha", d.alpha)
        .verdict("small", d.sup < tol)
        .verdict("within_bound", d.within_bound)
        .report(&d);
    Ok(o)
}

fn mix(c: &RunConfig, p: &MapParams) -> Result<Outcome, LabError> {
    let (source, target) = c.boxes().map_err(|e| LabError::InvalidParameter(e.to_string()))?;
    let fiber_tol = c.tol("fiber", 1e-3);
    let cfg = MixingConfig { fiber_tol, seed: c.seed, ..MixingConfig::default() };
    let s = mixing_sweep(p, &source, &target, c.span.unwrap_or(0), cfg)?;
    let mut table = Table::new(&["n", "verified", "source_margin", "target_margin", "source_residual", "target_residual", "tube_deviation"]);
    for r in &s.orbits {
        let tube = r.tube.as_ref().map_or(0.0, |t| t.deviation);
        table.rows.push(vec![
            r.n as f64,
            f64::from(u8::from(r.verified)),
            r.source_margin,
            r.target_margin,
            r.source_residual,
            r.target_residual,
            tube,
        ]);
    }
    let res = s.orbits.iter().map(|r| r.source_residual.max(r.target_residual)).fold(0.0, f64::max);
    let mut o = Outcome::default();
    o.value("n0", s.n0 as f64)
        .value("orbits", s.orbits.len() as f64)
        .judged("max_residual", res, fiber_tol)
        .value("failures", s.failures.len() as f64)
        .verdict("all_verified", s.all_verified)
        .verdict("saturation", s.saturation.pass);
    if p.is_perturbed() {
        let width = 10.0 * p.epsilon();
        let dev = s.orbits.iter().filter_map(|r| r.tube.as_ref()).map(|t| t.deviation).fold(0.0, f64::max);
        o.judged("tube_deviation", dev, width).verdict("tube", dev <= width);
    }
    o.report(&s);
    o.table = Some(table);
    Ok(o)
}

/// Seed for the `i`-th value of a sweep.
pub fn derived_seed(seed: u64, i: usize) -> u64 {
    stream(seed, i as u64).gen()
}
