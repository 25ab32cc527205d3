//! Points of the 4-torus, exact base arithmetic and the hyperbolic matrix.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::real::{Dd, Real};

/// Representative of an angle in `[0, 2pi)`.
pub fn reduce_angle(r: f64) -> Result<f64, LabError> {
    if !r.is_finite() {
        return Err(LabError::NonFinite("angle"));
    }
    Ok(r.wrap_angle())
}

/// Integer 2x2 matrix with unbounded entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMat2(pub [[BigInt; 2]; 2]);

impl IntMat2 {
    pub fn from_i64(m: [[i64; 2]; 2]) -> Self {
        IntMat2([
            [BigInt::from(m[0][0]), BigInt::from(m[0][1])],
            [BigInt::from(m[1][0]), BigInt::from(m[1][1])],
        ])
    }

    pub fn identity() -> Self {
        Self::from_i64([[1, 0], [0, 1]])
    }

    pub fn mul(&self, o: &IntMat2) -> IntMat2 {
        let a = &self.0;
        let b = &o.0;
        IntMat2([
            [&a[0][0] * &b[0][0] + &a[0][1] * &b[1][0], &a[0][0] * &b[0][1] + &a[0][1] * &b[1][1]],
            [&a[1][0] * &b[0][0] + &a[1][1] * &b[1][0], &a[1][0] * &b[0][1] + &a[1][1] * &b[1][1]],
        ])
    }

    pub fn pow(&self, mut k: u32) -> IntMat2 {
        let mut acc = IntMat2::identity();
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    pub fn det(&self) -> BigInt {
        let a = &self.0;
        &a[0][0] * &a[1][1] - &a[0][1] * &a[1][0]
    }

    /// Inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> IntMat2 {
        let a = &self.0;
        let d = self.det();
        debug_assert!(d.abs().is_one());
        IntMat2([
            [&a[1][1] * &d, -&a[0][1] * &d],
            [-&a[1][0] * &d, &a[0][0] * &d],
        ])
    }

    pub fn to_f64(&self) -> [[f64; 2]; 2] {
        let c = |v: &BigInt| v.to_f64().unwrap_or(f64::NAN);
        [[c(&self.0[0][0]), c(&self.0[0][1])], [c(&self.0[1][0]), c(&self.0[1][1])]]
    }
}

/// Integer matrix of `SL(2,Z)` type with its eigen data.
///
/// Eigenvalues are `sign*lambda` and `sign*mu` with `0 < lambda < 1 < mu`,
/// `sign` being the sign of the trace.
#[derive(Clone, Debug, Serialize)]
pub struct HyperbolicMatrix {
    pub entries: [[i64; 2]; 2],
    pub lambda: f64,
    pub mu: f64,
    pub sign: f64,
    pub e_s: [f64; 2],
    pub e_u: [f64; 2],
}


impl HyperbolicMatrix {
    /// The matrix `[[2,1],[1,1]]`.
    pub fn cat_map() -> Self {
        eigen_data([[2, 1], [1, 1]]).expect("cat map is hyperbolic")
    }

    pub fn int(&self) -> IntMat2 {
        IntMat2::from_i64(self.entries)
    }

    /// Signed stable eigenvalue raised to `k` (negative `k` allowed).
    pub fn stable_pow(&self, k: i32) -> f64 {
        self.sign.powi(k) * self.lambda.powi(k)
    }

    pub fn unstable_pow(&self, k: i32) -> f64 {
        self.sign.powi(k) * self.mu.powi(k)
    }

    /// Matrix with columns `e_s`, `e_u`.
    pub fn basis(&self) -> [[f64; 2]; 2] {
        [[self.e_s[0], self.e_u[0]], [self.e_s[1], self.e_u[1]]]
    }

    pub fn basis_inverse(&self) -> [[f64; 2]; 2] {
        let b = self.basis();
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        [[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]]
    }

    /// Coordinates `(s, u)` of a base vector in the eigenbasis.
    pub fn to_eigen(&self, v: [f64; 2]) -> [f64; 2] {
        let bi = self.basis_inverse();
        [bi[0][0] * v[0] + bi[0][1] * v[1], bi[1][0] * v[0] + bi[1][1] * v[1]]
    }

    /// Unit eigenvectors `(e_s, e_u)` computed in precision `T`.
    pub fn eigvecs<T: Real>(&self) -> ([T; 2], [T; 2]) {
        let [[a, b], [c, d]] = self.entries;
        let tr = a + d;
        let disc = T::of(((tr as i128).pow(2) - 4) as f64).sqrt();
        let mu = (T::of(tr.abs() as f64) + disc) / T::of(2.0);
        let sg = T::of(self.sign);
        let mf = [[a as f64, b as f64], [c as f64, d as f64]];
        (unit_eigenvector::<T>(mf, sg / mu), unit_eigenvector::<T>(mf, sg * mu))
    }

    /// Unit eigenvector (unstable if `unstable`, else stable) as integers
    /// over `2^prec`, with the sign convention of [`Self::eigvecs`].
    pub fn eigvec_fixed(&self, unstable: bool, prec: u32) -> [BigInt; 2] {
        let [[a, b], [c, d]] = self.entries;
        let q = prec + 16;
        let one = BigInt::one() << q;
        let tr = (a + d) as i128;
        let root = (BigInt::from(tr * tr - 4) << (2 * q)).sqrt();
        let t = BigInt::from(tr.abs()) * &one;
        let mut nu = if unstable { (t + root) >> 1u32 } else { (t - root) >> 1u32 };
        if self.sign < 0.0 {
            nu = -nu;
        }
        let c1 = [BigInt::from(b) * &one, &nu - BigInt::from(a) * &one];
        let c2 = [&nu - BigInt::from(d) * &one, BigInt::from(c) * &one];
        let sq = |v: &[BigInt; 2]| &v[0] * &v[0] + &v[1] * &v[1];
        let (n1, n2) = (sq(&c1), sq(&c2));
        let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
        let norm = n.sqrt();
        let mut e = [(&v[0] << prec) / &norm, (&v[1] << prec) / &norm];
        if e[0].is_negative() || (e[0].is_zero() && e[1].is_negative()) {
            e = [-&e[0], -&e[1]];
        }
        e
    }

    /// Signed eigenvalues `(sign*lambda, sign*mu)` in precision `T`.
    pub fn eigenvalues<T: Real>(&self) -> (T, T) {
        let [[a, _], [_, d]] = self.entries;
        let tr = a + d;
        let disc = T::of(((tr as i128).pow(2) - 4) as f64).sqrt();
        let mu = (T::of(tr.abs() as f64) + disc) / T::of(2.0);
        let sg = T::of(self.sign);
        (sg / mu, sg * mu)
    }

    /// Coordinates `(s, u)` of a base vector, in precision `T`.
    pub fn to_eigen_in<T: Real>(&self, v: [T; 2]) -> [T; 2] {
        let (es, eu) = self.eigvecs::<T>();
        let det = es[0] * eu[1] - eu[0] * es[1];
        [(v[0] * eu[1] - eu[0] * v[1]) / det, (es[0] * v[1] - v[0] * es[1]) / det]
    }
}

fn unit_eigenvector<T: Real>(m: [[f64; 2]; 2], nu: T) -> [T; 2] {
    let a = T::of(m[0][0]);
    let b = T::of(m[0][1]);
    let c = T::of(m[1][0]);
    let d = T::of(m[1][1]);
    let c1 = [b, nu - a];
    let c2 = [nu - d, c];
    let n1 = (c1[0] * c1[0] + c1[1] * c1[1]).sqrt();
    let n2 = (c2[0] * c2[0] + c2[1] * c2[1]).sqrt();
    let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
    let mut v = [v[0] / n, v[1] / n];
    if v[0] < T::zero() || (v[0] == T::zero() && v[1] < T::zero()) {
        v = [-v[0], -v[1]];
    }
    v
}

/// Eigen data of an integer matrix with determinant 1 and `|trace| > 2`.
pub fn eigen_data(entries: [[i64; 2]; 2]) -> Result<HyperbolicMatrix, LabError> {
    let [[a, b], [c, d]] = entries;
    let det = a as i128 * d as i128 - b as i128 * c as i128;
    if det != 1 {
        return Err(LabError::NotHyperbolic(format!("determinant {det} is not 1")));
    }
    let tr = a + d;
    if tr.abs() <= 2 {
        return Err(LabError::NotHyperbolic(format!("|trace| = {} is not above 2", tr.abs())));
    }
    let sign = if tr > 0 { 1.0 } else { -1.0 };
    let t = tr.abs() as f64;
    let disc = ((tr as i128).pow(2) - 4) as f64;
    let mu = (t + disc.sqrt()) / 2.0;
    let lambda = 1.0 / mu;
    let mf = [[a as f64, b as f64], [c as f64, d as f64]];
    let e_u = unit_eigenvector::<f64>(mf, sign * mu);
    let e_s = unit_eigenvector::<f64>(mf, sign * lambda);

    Ok(HyperbolicMatrix { entries, lambda, mu, sign, e_s, e_u })
}

/// Point of `T^2` stored exactly as fractions `u / 2^bits`, `v / 2^bits`
/// of a full turn.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "BaseRecord", try_from = "BaseRecord")]
pub struct BasePoint {
    pub u: BigUint,
    pub v: BigUint,
    pub bits: u32,
}

/// Serialized form: decimal numerators plus the angles for readability.
#[derive(Serialize, Deserialize)]
struct BaseRecord {
    bits: u32,
    u: String,
    v: String,
    #[serde(default, skip_deserializing)]
    angles: [f64; 2],
}

impl From<BasePoint> for BaseRecord {
    fn from(b: BasePoint) -> Self {
        let angles = b.angles::<f64>();
        BaseRecord { bits: b.bits, u: b.u.to_str_radix(10), v: b.v.to_str_radix(10), angles }
    }
}

impl TryFrom<BaseRecord> for BasePoint {
    type Error = String;

    fn try_from(r: BaseRecord) -> Result<Self, String> {
        let parse = |s: &str| BigInt::parse_bytes(s.as_bytes(), 10).ok_or_else(|| format!("bad numerator {s}"));
        Ok(BasePoint::from_numerators(parse(&r.u)?, parse(&r.v)?, r.bits))
    }
}

fn modulus(bits: u32) -> BigInt {
    BigInt::one() << bits
}

fn reduce_mod(x: BigInt, bits: u32) -> BigUint {
    let m = modulus(bits);
    x.mod_floor(&m).to_biguint().expect("non-negative after mod_floor")
}

impl BasePoint {
    pub fn zero(bits: u32) -> Self {
        BasePoint { u: BigUint::zero(), v: BigUint::zero(), bits }
    }

    /// Base point from fractions of a turn, rounded to `bits` bits.
    pub fn from_fractions(fu: f64, fv: f64, bits: u32) -> Self {
        BasePoint {
            u: reduce_mod(fu.to_fixed(bits), bits),
            v: reduce_mod(fv.to_fixed(bits), bits),
            bits,
        }
    }

    /// Base point from angles in radians.
    pub fn from_angles<T: Real>(z: T, w: T, bits: u32) -> Self {
        BasePoint {
            u: reduce_mod((z / T::two_pi()).to_fixed(bits), bits),
            v: reduce_mod((w / T::two_pi()).to_fixed(bits), bits),
            bits,
        }
    }

    pub fn from_numerators(u: BigInt, v: BigInt, bits: u32) -> Self {
        BasePoint { u: reduce_mod(u, bits), v: reduce_mod(v, bits), bits }
    }

    /// Angles `(z, w)` in `[0, 2pi)`.
    pub fn angles<T: Real>(&self) -> [T; 2] {
        let tp = T::two_pi();
        [T::from_fixed(&self.u, self.bits) * tp, T::from_fixed(&self.v, self.bits) * tp]
    }

    /// Exact image under an integer matrix, modulo 1.
    pub fn apply(&self, m: &IntMat2) -> BasePoint {
        let u = BigInt::from_biguint(Sign::Plus, self.u.clone());
        let v = BigInt::from_biguint(Sign::Plus, self.v.clone());
        let a = &m.0;
        let nu = &a[0][0] * &u + &a[0][1] * &v;
        let nv = &a[1][0] * &u + &a[1][1] * &v;
        BasePoint { u: reduce_mod(nu, self.bits), v: reduce_mod(nv, self.bits), bits: self.bits }
    }

    /// First coordinate of the image under `m`, as a fraction numerator.
    pub fn apply_first(&self, m: &IntMat2) -> BigUint {
        let u = BigInt::from_biguint(Sign::Plus, self.u.clone());
        let v = BigInt::from_biguint(Sign::Plus, self.v.clone());
        reduce_mod(&m.0[0][0] * u + &m.0[0][1] * v, self.bits)
    }

    /// Translate by signed numerators, modulo 1.
    pub fn shifted(&self, du: &BigInt, dv: &BigInt) -> BasePoint {
        let u = BigInt::from_biguint(Sign::Plus, self.u.clone()) + du;
        let v = BigInt::from_biguint(Sign::Plus, self.v.clone()) + dv;
        BasePoint { u: reduce_mod(u, self.bits), v: reduce_mod(v, self.bits), bits: self.bits }
    }

    /// Translate by a vector given in radians.
    pub fn shifted_by<T: Real>(&self, d: [T; 2]) -> BasePoint {
        let du = (d[0] / T::two_pi()).to_fixed(self.bits);
        let dv = (d[1] / T::two_pi()).to_fixed(self.bits);
        self.shifted(&du, &dv)
    }

    /// Numerator difference `self - other` lifted to `(-2^(bits-1), 2^(bits-1)]`.
    pub fn centered_diff(&self, other: &BasePoint) -> [BigInt; 2] {
        let half = BigInt::one() << (self.bits - 1);
        let m = modulus(self.bits);
        let f = |a: &BigUint, b: &BigUint| {
            let d = (BigInt::from_biguint(Sign::Plus, a.clone())
                - BigInt::from_biguint(Sign::Plus, b.clone()))
            .mod_floor(&m);
            if d > half {
                d - &m
            } else {
                d
            }
        };
        [f(&self.u, &other.u), f(&self.v, &other.v)]
    }

    /// Shortest displacement from `other` to `self` in radians.
    pub fn diff_angles<T: Real>(&self, other: &BasePoint) -> [T; 2] {
        let [du, dv] = self.centered_diff(other);
        [signed_fraction::<T>(&du, self.bits) * T::two_pi(), signed_fraction::<T>(&dv, self.bits) * T::two_pi()]
    }

    /// Same point at a different precision (truncating if fewer bits).
    pub fn with_bits(&self, bits: u32) -> BasePoint {
        let f = |x: &BigUint| {
            if bits >= self.bits {
                x << (bits - self.bits)
            } else {
                x >> (self.bits - bits)
            }
        };
        BasePoint { u: f(&self.u), v: f(&self.v), bits }
    }
}

pub(crate) fn signed_fraction<T: Real>(x: &BigInt, bits: u32) -> T {
    let r = T::from_fixed(x.magnitude(), bits);
    if x.is_negative() {
        -r
    } else {
        r
    }
}

/// Fiber coordinates `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> FiberPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        FiberPoint { x, y }
    }

    pub fn reduced(self) -> Self {
        FiberPoint { x: self.x.wrap_angle(), y: self.y.wrap_angle() }
    }

    /// Shortest displacement from `other` to `self`.
    pub fn diff(&self, other: &FiberPoint<T>) -> [T; 2] {
        [(self.x - other.x).wrap_centered(), (self.y - other.y).wrap_centered()]
    }

    pub fn cast<S: Real>(&self) -> FiberPoint<S> {
        FiberPoint { x: self.x.convert(), y: self.y.convert() }
    }
}

impl FiberPoint<f64> {
    pub fn to_dd(self) -> FiberPoint<Dd> {
        FiberPoint { x: Dd::from(self.x), y: Dd::from(self.y) }
    }
}

/// Point of `T^4`: fiber coordinates with an exact base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint<T> {
    pub fiber: FiberPoint<T>,
    pub base: BasePoint,
}

impl<T: Real> TorusPoint<T> {
    pub fn new(x: T, y: T, base: BasePoint) -> Self {
        TorusPoint { fiber: FiberPoint { x, y }.reduced(), base }
    }

    /// All four coordinates as angles.
    pub fn angles(&self) -> [T; 4] {
        let [z, w] = self.base.angles::<T>();
        [self.fiber.x, self.fiber.y, z, w]
    }

    /// Shortest displacement from `other` to `self` on `T^4`.
    pub fn diff(&self, other: &TorusPoint<T>) -> [T; 4] {
        let f = self.fiber.diff(&other.fiber);
        let b = self.base.diff_angles::<T>(&other.base);
        [f[0], f[1], b[0], b[1]]
    }

    pub fn to_f64(&self) -> TorusPoint<f64> {
        self.cast()
    }

    pub fn cast<S: Real>(&self) -> TorusPoint<S> {
        TorusPoint { fiber: self.fiber.cast(), base: self.base.clone() }
    }
}

impl TorusPoint<f64> {
    /// Point from four angles, with the base rounded to `bits` bits.
    pub fn from_angles(a: [f64; 4], bits: u32) -> Result<Self, LabError> {
        for v in a {
            if !v.is_finite() {
                return Err(LabError::NonFinite("point coordinate"));
            }
        }
        Ok(TorusPoint::new(a[0], a[1], BasePoint::from_angles(a[2], a[3], bits)))
    }

    pub fn to_dd(&self) -> TorusPoint<Dd> {
        TorusPoint { fiber: self.fiber.to_dd(), base: self.base.clone() }
    }
}

/// Euclidean distance on the flat torus.
pub fn torus_dist<T: Real>(p: &TorusPoint<T>, q: &TorusPoint<T>) -> T {
    let d = p.diff(q);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3]).sqrt()
}

/// Distance between fiber coordinates only.
pub fn fiber_dist<T: Real>(p: &FiberPoint<T>, q: &FiberPoint<T>) -> T {
    let d = p.diff(q);
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Tangent vector split as center part plus stable and unstable coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitVector {
    pub v_c: [f64; 2],
    pub v_s: f64,
    pub v_u: f64,
}

impl SplitVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.v_c[0], self.v_c[1], self.v_s, self.v_u]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        SplitVector { v_c: [a[0], a[1]], v_s: a[2], v_u: a[3] }
    }

    /// Ambient vector `(v_c, v_s e_s + v_u e_u)`.
    pub fn ambient(&self, hm: &HyperbolicMatrix) -> [f64; 4] {
        [
            self.v_c[0],
            self.v_c[1],
            self.v_s * hm.e_s[0] + self.v_u * hm.e_u[0],
            self.v_s * hm.e_s[1] + self.v_u * hm.e_u[1],
        ]
    }
}

/// Decompose an ambient tangent vector along `E^c + E^s + E^u`.
pub fn split_vector(hm: &HyperbolicMatrix, v: [f64; 4]) -> SplitVector {
    let [s, u] = hm.to_eigen([v[2], v[3]]);
    SplitVector { v_c: [v[0], v[1]], v_s: s, v_u: u }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn reduce_examples() {
        assert_abs_diff_eq!(reduce_angle(23.1416).unwrap(), 4.2920, epsilon = 1e-4);
        assert_eq!(reduce_angle(-0.0).unwrap(), 0.0);
        assert!(reduce_angle(f64::NAN).is_err());
        assert!(reduce_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn fixed_eigenvectors_are_eigenvectors() {
        for entries in [[[2, 1], [1, 1]], [[-3, 1], [-1, 0]], [[5, 2], [2, 1]]] {
            let h = eigen_data(entries).unwrap();
            let m = IntMat2::from_i64(entries);
            let prec = 900;
            for (unstable, f) in [(true, h.e_u), (false, h.e_s)] {
                let e = h.eigvec_fixed(unstable, prec);
                let scale = (BigInt::one() << prec).to_f64().unwrap();
                assert_abs_diff_eq!(e[0].to_f64().unwrap() / scale, f[0], epsilon = 1e-12);
                assert_abs_diff_eq!(e[1].to_f64().unwrap() / scale, f[1], epsilon = 1e-12);
                // A e is parallel to e up to rounding
                let a = &m.0;
                let w = [&a[0][0] * &e[0] + &a[0][1] * &e[1], &a[1][0] * &e[0] + &a[1][1] * &e[1]];
                let cross = &w[0] * &e[1] - &w[1] * &e[0];
                assert!(cross.bits() < prec as u64 + 8, "{}", cross.bits());
            }
        }
    }

    #[test]
    fn cat_map_eigen_data() {
        let h = HyperbolicMatrix::cat_map();
        assert_abs_diff_eq!(h.mu, 2.6180340, epsilon = 1e-7);
        assert_abs_diff_eq!(h.lambda, 0.3819660, epsilon = 1e-7);
        assert_abs_diff_eq!(h.e_u[0], 0.8506508, epsilon = 1e-7);
        assert_abs_diff_eq!(h.e_u[1], 0.5257311, epsilon = 1e-7);
        // e_s up to sign
        assert_abs_diff_eq!(h.e_s[0].abs(), 0.5257311, epsilon = 1e-7);
        assert_abs_diff_eq!(h.e_s[1].abs(), 0.8506508, epsilon = 1e-7);
        assert!(h.e_s[0] * h.e_s[1] < 0.0);
    }

    #[test]
    fn eigen_rejects() {
        assert!(matches!(eigen_data([[1, 1], [0, 1]]), Err(LabError::NotHyperbolic(_))));
        assert!(matches!(eigen_data([[2, 0], [0, 1]]), Err(LabError::NotHyperbolic(_))));
        assert!(eigen_data([[-2, 1], [1, -1]]).is_ok());
    }

    #[test]
    fn negative_trace_eigenvectors() {
        let h = eigen_data([[-3, 1], [-1, 0]]).unwrap();
        let m = [[-3.0, 1.0], [-1.0, 0.0]];
        let apply = |v: [f64; 2]| [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]];
        let au = apply(h.e_u);
        assert_abs_diff_eq!(au[0], -h.mu * h.e_u[0], epsilon = 1e-12);
        let as_ = apply(h.e_s);
        assert_abs_diff_eq!(as_[1], -h.lambda * h.e_s[1], epsilon = 1e-12);
    }

    #[test]
    fn exact_square_of_cat_map() {
        let a2 = IntMat2::from_i64([[2, 1], [1, 1]]).pow(2);
        let p = BasePoint::from_fractions(0.25, 0.0, 64);
        let q = p.apply(&a2);
        assert_eq!(q, BasePoint::from_fractions(0.25, 0.75, 64));
    }

    #[test]
    fn dd_eigenvectors_agree() {
        let h = HyperbolicMatrix::cat_map();
        for i in 0..2 {
            let (es, eu) = h.eigvecs::<Dd>();
            assert_abs_diff_eq!(eu[i].hi(), h.e_u[i], epsilon = 1e-15);
            assert_abs_diff_eq!(es[i].hi(), h.e_s[i], epsilon = 1e-15);
        }
        let (b, a) = h.eigvecs::<Dd>();
        assert!((a[0] * b[0] + a[1] * b[1]).hi().abs() < 1e-31);
    }

    #[test]
    fn split_of_zero_base() {
        let h = HyperbolicMatrix::cat_map();
        let s = split_vector(&h, [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(s, SplitVector { v_c: [0.0, 1.0], v_s: 0.0, v_u: 0.0 });
    }

    #[test]
    fn distance_wraps() {
        let b = BasePoint::zero(64);
        let p = TorusPoint::new(0.1, 0.0, b.clone());
        let q = TorusPoint::new(TAU - 0.1, 0.0, b);
        assert_abs_diff_eq!(torus_dist(&p, &q), 0.2, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn reduce_in_range(r in -1e6f64..1e6) {
            let a = reduce_angle(r).unwrap();
            prop_assert!((0.0..TAU).contains(&a));
            let k = ((r - a) / TAU).round();
            prop_assert!((r - a - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn split_reconstructs(v in proptest::array::uniform4(-10.0f64..10.0)) {
            let h = HyperbolicMatrix::cat_map();
            let s = split_vector(&h, v);
            let back = s.ambient(&h);
            for i in 0..4 {
                prop_assert!((back[i] - v[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn base_power_inverse_roundtrip(fu in 0.0f64..1.0, fv in 0.0f64..1.0, k in 0u32..80) {
            let a = HyperbolicMatrix::cat_map().int();
            let p = BasePoint::from_fractions(fu, fv, 256);
            let q = p.apply(&a.pow(k)).apply(&a.pow(k).inverse_unimodular());
            prop_assert_eq!(q, p);
        }

        #[test]
        fn centered_diff_antisymmetric(fu in 0.0f64..1.0, fv in 0.0f64..1.0, gu in 0.0f64..1.0, gv in 0.0f64..1.0) {
            let p = BasePoint::from_fractions(fu, fv, 128);
            let q = BasePoint::from_fractions(gu, gv, 128);
            let d = p.centered_diff(&q);
            prop_assert_eq!(q.shifted(&d[0], &d[1]), p);
        }
    }
}
