//! The skew-product map, its exact inverse and its derivative.

use nalgebra::Matrix4;
use num_bigint::BigInt;
use num_traits::One;
use serde::Serialize;

use crate::error::LabError;
use crate::perturb::PerturbationSpec;
use crate::real::Real;
use crate::torus::{eigen_data, torus_dist, FiberPoint, HyperbolicMatrix, IntMat2, TorusPoint};

pub const MAX_N: f64 = 300.0;
pub const DEFAULT_BITS: u32 = 512;

/// Time direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn reverse(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Matrix powers reduced modulo `2^bits`, used to move base points.
#[derive(Clone, Debug)]
struct BasePowers {
    n: IntMat2,
    two_n: IntMat2,
    inv_n: IntMat2,
    inv_two_n: IntMat2,
}

/// Eigenvalue powers used by split-coordinate Jacobians.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SplitScalars {
    /// `(sign*lambda)^[N]` and `(sign*mu)^[N]`.
    pub stable_n: f64,
    pub unstable_n: f64,
    pub stable_2n: f64,
    pub unstable_2n: f64,
    /// `(sign*lambda)^([N]-[2N])` and `(sign*mu)^([N]-[2N])`.
    pub stable_back: f64,
    pub unstable_back: f64,
}

/// Parameters of `f_N` and, optionally, of a perturbation `P` giving `P o f_N`.
#[derive(Clone, Debug)]
pub struct MapParams {
    pub n: f64,
    pub n_floor: u32,
    pub two_n_floor: u32,
    pub bits: u32,
    pub matrix: HyperbolicMatrix,
    pub perturbation: Option<PerturbationSpec>,
    pub split: SplitScalars,
    powers: BasePowers,
    /// First row of `A^[N]`.
    forcing_row: [f64; 2],
    /// First row of `A^([N]-[2N])`, exact integers rounded once.
    back_forcing_row: [f64; 2],
    two_n_ambient: [[f64; 2]; 2],
    inv_two_n_ambient: [[f64; 2]; 2],
}

fn reduce_entries(m: &IntMat2, bits: u32) -> IntMat2 {
    use num_integer::Integer;
    let md = BigInt::one() << bits;
    IntMat2([
        [m.0[0][0].mod_floor(&md), m.0[0][1].mod_floor(&md)],
        [m.0[1][0].mod_floor(&md), m.0[1][1].mod_floor(&md)],
    ])
}

impl MapParams {
    pub fn new(n: f64, entries: [[i64; 2]; 2], bits: u32) -> Result<Self, LabError> {
        if !n.is_finite() || !(1.0..=MAX_N).contains(&n) {
            return Err(LabError::InvalidParameter(format!("N = {n} outside [1, {MAX_N}]")));
        }
        if bits < 128 {
            return Err(LabError::InvalidParameter(format!("bits = {bits} below 128")));
        }
        let matrix = eigen_data(entries)?;
        let n_floor = n.floor() as u32;
        let two_n_floor = (2.0 * n).floor() as u32;
        let a = matrix.int();
        let an = a.pow(n_floor);
        let a2n = a.pow(two_n_floor);
        let ian = an.inverse_unimodular();
        let ia2n = a2n.inverse_unimodular();
        let an_f = an.to_f64();
        let split = SplitScalars {
            stable_n: matrix.stable_pow(n_floor as i32),
            unstable_n: matrix.unstable_pow(n_floor as i32),
            stable_2n: matrix.stable_pow(two_n_floor as i32),
            unstable_2n: matrix.unstable_pow(two_n_floor as i32),
            stable_back: matrix.stable_pow(n_floor as i32 - two_n_floor as i32),
            unstable_back: matrix.unstable_pow(n_floor as i32 - two_n_floor as i32),
        };
        Ok(MapParams {
            n,
            n_floor,
            two_n_floor,
            bits,
            split,
            forcing_row: an_f[0],
            back_forcing_row: an.mul(&ia2n).to_f64()[0],
            two_n_ambient: a2n.to_f64(),
            inv_two_n_ambient: ia2n.to_f64(),
            powers: BasePowers {
                n: reduce_entries(&an, bits),
                two_n: reduce_entries(&a2n, bits),
                inv_n: reduce_entries(&ian, bits),
                inv_two_n: reduce_entries(&ia2n, bits),
            },
            matrix,
            perturbation: None,
        })
    }

    /// Unperturbed map with the default matrix `[[2,1],[1,1]]`.
    pub fn standard(n: f64) -> Result<Self, LabError> {
        Self::new(n, [[2, 1], [1, 1]], DEFAULT_BITS)
    }

    pub fn with_bits(&self, bits: u32) -> Result<Self, LabError> {
        let mut p = Self::new(self.n, self.matrix.entries, bits)?;
        p.perturbation = self.perturbation.clone();
        Ok(p)
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbation.is_some()
    }

    pub fn epsilon(&self) -> f64 {
        self.perturbation.as_ref().map_or(0.0, |p| p.epsilon)
    }

    /// `2pi * [A^[N] b]_x`, the forcing term added to the fiber.
    pub fn forcing<T: Real>(&self, base: &crate::torus::BasePoint) -> T {
        T::from_fixed(&base.apply_first(&self.powers.n), base.bits) * T::two_pi()
    }

    fn check_bits(&self, m: &TorusPoint<impl Real>) {
        debug_assert_eq!(m.base.bits, self.bits, "base precision differs from map precision");
    }

    /// `f_N`, without perturbation.
    pub fn forward_unperturbed<T: Real>(&self, m: &TorusPoint<T>) -> TorusPoint<T> {
        self.check_bits(m);
        let t = self.forcing::<T>(&m.base);
        let fiber = skew_fiber(self.n, m.fiber, t);
        TorusPoint { fiber, base: m.base.apply(&self.powers.two_n) }
    }

    /// `f_N^{-1}` in closed form, without perturbation.
    pub fn inverse_unperturbed<T: Real>(&self, m: &TorusPoint<T>) -> TorusPoint<T> {
        self.check_bits(m);
        let base = m.base.apply(&self.powers.inv_two_n);
        let t = self.forcing::<T>(&base);
        let x = m.fiber.y;
        let y = T::of(2.0 * self.n) * x.sine() + x + x + t - m.fiber.x;
        TorusPoint { fiber: FiberPoint { x, y: y.wrap_angle() }, base }
    }

    /// One step of the map (perturbed if a perturbation is attached).
    pub fn forward<T: Real>(&self, m: &TorusPoint<T>) -> TorusPoint<T> {
        let p = self.forward_unperturbed(m);
        match &self.perturbation {
            Some(pert) => pert.apply(&p),
            None => p,
        }
    }

    pub fn inverse<T: Real>(&self, m: &TorusPoint<T>) -> TorusPoint<T> {
        match &self.perturbation {
            Some(pert) => self.inverse_unperturbed(&pert.unapply(m)),
            None => self.inverse_unperturbed(m),
        }
    }

    pub fn step<T: Real>(&self, m: &TorusPoint<T>, dir: Direction) -> TorusPoint<T> {
        match dir {
            Direction::Forward => self.forward(m),
            Direction::Backward => self.inverse(m),
        }
    }

    /// `k` steps in direction `dir`.
    pub fn iterate<T: Real>(&self, m: &TorusPoint<T>, dir: Direction, k: u32) -> TorusPoint<T> {
        let mut p = m.clone();
        for _ in 0..k {
            p = self.step(&p, dir);
        }
        p
    }

    /// The conjugate map `g_N` built from `A^{-1}`; `f^{-1} = I o g_N o I`.
    pub fn conjugate_step<T: Real>(&self, m: &TorusPoint<T>) -> TorusPoint<T> {
        let t = T::from_fixed(&m.base.apply_first(&self.powers.inv_n), m.base.bits) * T::two_pi();
        let fiber = skew_fiber(self.n, m.fiber, t);
        TorusPoint { fiber, base: m.base.apply(&self.powers.inv_two_n) }
    }

    /// Jacobian at `m`, of the map (forward) or of its inverse (backward).
    pub fn derivative(&self, m: &TorusPoint<f64>, dir: Direction) -> Jacobian {
        let b = [self.forcing_row, [0.0, 0.0]];
        match dir {
            Direction::Forward => {
                let c = 2.0 * self.n * m.fiber.x.cos() + 2.0;
                let shear = self.perturbation.as_ref().map(|p| p.jacobian(&self.forward_unperturbed(m)));
                Jacobian {
                    block: Mat4Block { ds: [[c, -1.0], [1.0, 0.0]], b, a2n: self.two_n_ambient },
                    shear,
                    direction: dir,
                    c,
                }
            }
            Direction::Backward => {
                let (q, shear) = match &self.perturbation {
                    Some(p) => (p.unapply(m), Some(p.inverse_jacobian(m))),
                    None => (m.clone(), None),
                };
                let c = 2.0 * self.n * q.fiber.y.cos() + 2.0;
                // -ds^{-1} (P_x A^[N]) A^{-[2N]} has the single nonzero row of A^([N]-[2N])
                let r = self.back_forcing_row;
                let ai = self.inv_two_n_ambient;
                Jacobian {
                    block: Mat4Block {
                        ds: [[0.0, 1.0], [-1.0, c]],
                        b: [[0.0, 0.0], r],
                        a2n: ai,
                    },
                    shear,
                    direction: dir,
                    c,
                }
            }
        }
    }

    /// Largest distance between `f^{-1}(m)` and `I g_N I (m)`.
    pub fn involution_defect(&self, m: &TorusPoint<f64>) -> f64 {
        let flip = |p: &TorusPoint<f64>| TorusPoint {
            fiber: FiberPoint { x: p.fiber.y, y: p.fiber.x },
            base: p.base.clone(),
        };
        let a = self.inverse_unperturbed(m);
        let b = flip(&self.conjugate_step(&flip(m)));
        torus_dist(&a, &b)
    }

    /// Jacobian in split coordinates `(x, y, s, u)`.
    pub fn split_jacobian(&self, jac: &Jacobian) -> Matrix4<f64> {
        let sc = &self.split;
        let ex = [self.matrix.e_s[0], self.matrix.e_u[0]];
        let mut m = Matrix4::zeros();
        match jac.direction {
            Direction::Forward => {
                m[(0, 0)] = jac.c;
                m[(0, 1)] = -1.0;
                m[(1, 0)] = 1.0;
                m[(0, 2)] = sc.stable_n * ex[0];
                m[(0, 3)] = sc.unstable_n * ex[1];
                m[(2, 2)] = sc.stable_2n;
                m[(3, 3)] = sc.unstable_2n;
            }
            Direction::Backward => {
                m[(0, 1)] = 1.0;
                m[(1, 0)] = -1.0;
                m[(1, 1)] = jac.c;
                // -ds^{-1} applied to the column (r, 0)
                let r = [sc.stable_back * ex[0], sc.unstable_back * ex[1]];
                for k in 0..2 {
                    m[(1, 2 + k)] = r[k];
                }
                m[(2, 2)] = 1.0 / sc.stable_2n;
                m[(3, 3)] = 1.0 / sc.unstable_2n;
            }
        }
        match &jac.shear {
            None => m,
            Some(sh) => {
                let shs = self.shear_to_split(sh);
                match jac.direction {
                    Direction::Forward => shs * m,
                    Direction::Backward => m * shs,
                }
            }
        }
    }

    fn shear_to_split(&self, sh: &Matrix4<f64>) -> Matrix4<f64> {
        let b = self.matrix.basis();
        let bi = self.matrix.basis_inverse();
        let mut t = Matrix4::identity();
        let mut ti = Matrix4::identity();
        for i in 0..2 {
            for j in 0..2 {
                t[(2 + i, 2 + j)] = b[i][j];
                ti[(2 + i, 2 + j)] = bi[i][j];
            }
        }
        ti * sh * t
    }
}

/// `s_N(x, y) + (t, 0)`, reduced.
fn skew_fiber<T: Real>(n: f64, f: FiberPoint<T>, t: T) -> FiberPoint<T> {
    let x = f.x;
    let nx = T::of(2.0 * n) * x.sine() + x + x - f.y + t;
    FiberPoint { x: nx.wrap_angle(), y: x }
}

/// The area-preserving fiber map `(x, y) -> (2N sin x + 2x - y, x)`.
pub fn standard_map(n: f64, x: f64, y: f64) -> Result<(f64, f64), LabError> {
    if !(x.is_finite() && y.is_finite() && n.is_finite()) {
        return Err(LabError::NonFinite("standard map input"));
    }
    let f = skew_fiber(n, FiberPoint { x, y }, 0.0);
    Ok((f.x, f.y))
}

/// Block form `[[ds, b], [0, a2n]]` of an unperturbed Jacobian.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Mat4Block {
    pub ds: [[f64; 2]; 2],
    pub b: [[f64; 2]; 2],
    pub a2n: [[f64; 2]; 2],
}

impl Mat4Block {
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = self.ds[i][j];
                m[(i, 2 + j)] = self.b[i][j];
                m[(2 + i, 2 + j)] = self.a2n[i][j];
            }
        }
        m
    }
}

/// Jacobian of the map or of its inverse at a point.
#[derive(Clone, Debug)]
pub struct Jacobian {
    pub block: Mat4Block,
    /// Derivative of the perturbing shear (at the image for forward, at the
    /// point itself for backward).
    pub shear: Option<Matrix4<f64>>,
    pub direction: Direction,
    /// `2N cos x + 2` at the relevant preimage.
    pub c: f64,
}

impl Jacobian {
    /// Assembled ambient 4x4 matrix.
    pub fn ambient(&self) -> Matrix4<f64> {
        let b = self.block.to_matrix();
        match (&self.shear, self.direction) {
            (None, _) => b,
            (Some(s), Direction::Forward) => s * b,
            (Some(s), Direction::Backward) => b * s,
        }
    }

    /// Determinant from the blocks: `det(ds) * det(A^[2N]) * det(shear)`.
    pub fn det(&self) -> f64 {
        let d = self.block.ds;
        let ds = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        // integer power of a determinant-one matrix
        let sh = self.shear.as_ref().map_or(1.0, |s| s.determinant());
        ds * sh
    }
}

/// Draw a perturbation of C^1 size about `epsilon` and attach it.
pub fn perturb(params: &MapParams, epsilon: f64, seed: u64) -> Result<MapParams, LabError> {
    if !epsilon.is_finite() || !(0.0..0.1).contains(&epsilon) {
        return Err(LabError::InvalidParameter(format!("epsilon = {epsilon} outside [0, 0.1)")));
    }
    let mut p = params.clone();
    p.perturbation = if epsilon == 0.0 { None } else { Some(PerturbationSpec::random(epsilon, seed)) };
    Ok(p)
}

#[cfg(test)]
mod tests;
