//! Volume-preserving C^1-small perturbations built from coordinate shears.

use nalgebra::Matrix4;
use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::par::{map_indices, Exec};
use crate::real::Real;
use crate::rng::stream;
use crate::torus::TorusPoint;

/// Shear adding `amp * sin(freq . m + phase)` to coordinate `target`.
///
/// `freq[target]` is zero, so each shear preserves volume and is inverted by
/// subtracting the same increment.
#[derive(Clone, Debug, Serialize)]
pub struct Shear {
    pub target: usize,
    pub freq: [i32; 4],
    pub phase: f64,
    pub amp: f64,
}

impl Shear {
    fn arg<T: Real>(&self, a: &[T; 4]) -> T {
        let mut s = T::of(self.phase);
        for i in 0..4 {
            if self.freq[i] != 0 {
                s = s + a[i] * T::of(self.freq[i] as f64);
            }
        }
        s
    }

    fn increment<T: Real>(&self, a: &[T; 4]) -> T {
        T::of(self.amp) * self.arg(a).sine()
    }

    fn shift<T: Real>(&self, p: &TorusPoint<T>, sign: f64) -> TorusPoint<T> {
        let a = p.angles();
        let inc = self.increment(&a) * T::of(sign);
        let mut q = p.clone();
        match self.target {
            0 => q.fiber.x = (q.fiber.x + inc).wrap_angle(),
            1 => q.fiber.y = (q.fiber.y + inc).wrap_angle(),
            2 => q.base = q.base.shifted_by([inc, T::zero()]),
            _ => q.base = q.base.shifted_by([T::zero(), inc]),
        }
        q
    }

    pub fn apply<T: Real>(&self, p: &TorusPoint<T>) -> TorusPoint<T> {
        self.shift(p, 1.0)
    }

    pub fn unapply<T: Real>(&self, p: &TorusPoint<T>) -> TorusPoint<T> {
        self.shift(p, -1.0)
    }

    /// Jacobian at a point given by angles; `sign = -1` gives the inverse shear.
    fn jacobian(&self, a: &[f64; 4], sign: f64) -> Matrix4<f64> {
        let g = sign * self.amp * self.arg::<f64>(a).cos();
        let mut m = Matrix4::identity();
        for j in 0..4 {
            m[(self.target, j)] += g * self.freq[j] as f64;
        }
        m
    }

    fn apply_angles(&self, a: &mut [f64; 4], scale: f64) {
        a[self.target] += scale * self.amp * self.arg::<f64>(a).sin();
    }
}

/// Composition of shears applied after the unperturbed map.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub seed: u64,
    pub shears: Vec<Shear>,
    /// Measured C^1 distance from the identity.
    pub c1_distance: f64,
}

const GRID: usize = 32;

impl PerturbationSpec {
    /// Random shears scaled so the C^1 distance lands in `[epsilon/2, epsilon]`.
    pub fn random(epsilon: f64, seed: u64) -> Self {
        let mut rng = stream(seed, u64::MAX);
        let mut targets = [0usize, 1, 2, 3];
        targets.shuffle(&mut rng);
        let shears: Vec<Shear> = targets
            .iter()
            .map(|&target| {
                let mut freq = [0i32; 4];
                while freq.iter().all(|f| f.is_zero()) {
                    for (j, f) in freq.iter_mut().enumerate() {
                        *f = if j == target { 0 } else { rng.gen_range(-2..=2) };
                    }
                }
                Shear {
                    target,
                    freq,
                    phase: rng.gen::<f64>() * std::f64::consts::TAU,
                    amp: rng.gen_range(0.5..1.0),
                }
            })
            .collect();
        let mut spec = PerturbationSpec { epsilon, seed, shears, c1_distance: 0.0 };
        let unit = spec.c1_distance_scaled(1.0);
        let mut scale = 0.75 * epsilon / unit;
        let mut d = spec.c1_distance_scaled(scale);
        for _ in 0..20 {
            if d <= epsilon && d >= 0.5 * epsilon {
                break;
            }
            scale *= 0.75 * epsilon / d;
            d = spec.c1_distance_scaled(scale);
        }
        for s in &mut spec.shears {
            s.amp *= scale;
        }
        spec.c1_distance = d;
        spec
    }

    pub fn apply<T: Real>(&self, p: &TorusPoint<T>) -> TorusPoint<T> {
        self.shears.iter().fold(p.clone(), |q, s| s.apply(&q))
    }

    pub fn unapply<T: Real>(&self, p: &TorusPoint<T>) -> TorusPoint<T> {
        self.shears.iter().rev().fold(p.clone(), |q, s| s.unapply(&q))
    }

    /// Jacobian of the composed shear at `p`.
    pub fn jacobian(&self, p: &TorusPoint<f64>) -> Matrix4<f64> {
        let mut a = p.angles();
        let mut m = Matrix4::identity();
        for s in &self.shears {
            m = s.jacobian(&a, 1.0) * m;
            s.apply_angles(&mut a, 1.0);
        }
        m
    }

    /// Jacobian of the inverse composed shear at `p`.
    pub fn inverse_jacobian(&self, p: &TorusPoint<f64>) -> Matrix4<f64> {
        let mut a = p.angles();
        let mut m = Matrix4::identity();
        for s in self.shears.iter().rev() {
            m = s.jacobian(&a, -1.0) * m;
            s.apply_angles(&mut a, -1.0);
        }
        m
    }

    /// Sup displacement plus sup Frobenius norm of `DP - I` on a grid,
    /// with every amplitude multiplied by `scale`.
    pub fn c1_distance_scaled(&self, scale: f64) -> f64 {
        let h = std::f64::consts::TAU / GRID as f64;
        let rows = map_indices(Exec::default(), GRID * GRID, |ij| {
            let (i, j) = (ij / GRID, ij % GRID);
            let mut disp: f64 = 0.0;
            let mut deriv: f64 = 0.0;
            for k in 0..GRID {
                for l in 0..GRID {
                    let a0 = [i as f64 * h, j as f64 * h, k as f64 * h, l as f64 * h];
                    let mut a = a0;
                    let mut m = Matrix4::<f64>::identity();
                    for s in &self.shears {
                        let g = scale * s.amp * s.arg::<f64>(&a).cos();
                        let mut js = Matrix4::<f64>::identity();
                        for c in 0..4 {
                            js[(s.target, c)] += g * s.freq[c] as f64;
                        }
                        m = js * m;
                        s.apply_angles(&mut a, scale);
                    }
                    let d: f64 = (0..4).map(|c| (a[c] - a0[c]).powi(2)).sum::<f64>().sqrt();
                    disp = disp.max(d);
                    deriv = deriv.max((m - Matrix4::identity()).norm());
                }
            }
            (disp, deriv)
        });
        let disp = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let deriv = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        disp + deriv
    }
}
