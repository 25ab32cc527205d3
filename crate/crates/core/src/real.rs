//! Scalar backends for fiber arithmetic: plain `f64` and double-double.

use std::cmp::Ordering;
use std::fmt::{self, Debug};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2` (about 106 bits).
#[derive(Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const fn from_parts(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    /// Exact sum of two doubles.
    pub fn sum(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Dd { hi, lo }
    }

    /// Exact product of two doubles.
    pub fn product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Dd { hi, lo }
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, self.lo.mul_add(b, e));
        Dd { hi, lo }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hi)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&o.lo),
            c => Some(c),
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = self.hi.mul_add(b.lo, e);
        let e = self.lo.mul_add(b.hi, e);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        // long division with three partial quotients
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

const DD_PI: Dd = Dd::from_parts(std::f64::consts::PI, 1.2246467991473532e-16);
const DD_TAU: Dd = Dd::from_parts(std::f64::consts::TAU, 2.4492935982947064e-16);
const PIO2_HI: Dd = Dd::from_parts(std::f64::consts::FRAC_PI_2, 6.123233995736766e-17);
// third word of pi/2
const PIO2_LO: f64 = -1.4973849048591698e-33;

/// Scalar used for fiber coordinates and angles.
const CONVERT_BITS: u32 = 960;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn of(x: f64) -> Self;
    /// Leading `f64` component.
    fn hi(self) -> f64;
    fn sine(self) -> Self;
    fn cosine(self) -> Self;
    fn floor(self) -> Self;
    fn sqrt(self) -> Self;
    fn two_pi() -> Self;
    fn pi() -> Self;

    fn zero() -> Self {
        Self::of(0.0)
    }

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }

    fn max(self, o: Self) -> Self {
        if o > self {
            o
        } else {
            self
        }
    }

    fn min(self, o: Self) -> Self {
        if o < self {
            o
        } else {
            self
        }
    }

    /// Value of `num / 2^bits`.
    fn from_fixed(num: &BigUint, bits: u32) -> Self;

    /// Signed fixed-point value of `self * 2^bits`, rounded to nearest.
    fn to_fixed(self, bits: u32) -> BigInt;

    /// Value of a signed fixed-point number `num / 2^bits`.
    fn from_signed_fixed(num: &BigInt, bits: u32) -> Self {
        let v = Self::from_fixed(num.magnitude(), bits);
        if num.sign() == num_bigint::Sign::Minus {
            -v
        } else {
            v
        }
    }

    /// Conversion to another precision, exact up to the coarser of the two.
    fn convert<S: Real>(self) -> S {
        S::from_signed_fixed(&self.to_fixed(CONVERT_BITS), CONVERT_BITS)
    }

    /// Representative of `self` in `[0, 2pi)`.
    fn wrap_angle(self) -> Self {
        let tp = Self::two_pi();
        let mut r = self - (self / tp).floor() * tp;
        if r < Self::zero() {
            r = r + tp;
        }
        if r >= tp {
            r = r - tp;
        }
        r
    }

    /// Representative of `self` in `[-pi, pi)`.
    fn wrap_centered(self) -> Self {
        let p = Self::pi();
        (self + p).wrap_angle() - p
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn hi(self) -> f64 {
        self
    }
    #[inline]
    fn sine(self) -> Self {
        self.sin()
    }
    #[inline]
    fn cosine(self) -> Self {
        self.cos()
    }
    #[inline]
    fn floor(self) -> Self {
        f64::floor(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn two_pi() -> Self {
        std::f64::consts::TAU
    }
    #[inline]
    fn pi() -> Self {
        std::f64::consts::PI
    }
    fn from_fixed(num: &BigUint, bits: u32) -> Self {
        biguint_scaled_f64(num, bits)
    }
    fn to_fixed(self, bits: u32) -> BigInt {
        f64_to_fixed(self, bits)
    }
}

impl Real for Dd {
    #[inline]
    fn of(x: f64) -> Self {
        Dd::from(x)
    }
    #[inline]
    fn hi(self) -> f64 {
        self.hi
    }
    fn sine(self) -> Self {
        dd_sin_cos(self).0
    }
    fn cosine(self) -> Self {
        dd_sin_cos(self).1
    }
    fn floor(self) -> Self {
        let h = self.hi.floor();
        if h == self.hi {
            let (hi, lo) = quick_two_sum(h, self.lo.floor());
            Dd { hi, lo }
        } else {
            Dd::from(h)
        }
    }
    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::from(self.hi.sqrt());
        }
        let x = self.hi.sqrt();
        let r = self - Dd::product(x, x);
        Dd::from(x) + Dd::from(r.hi / (2.0 * x))
    }
    #[inline]
    fn two_pi() -> Self {
        DD_TAU
    }
    #[inline]
    fn pi() -> Self {
        DD_PI
    }
    fn from_fixed(num: &BigUint, bits: u32) -> Self {
        scaled_dd(num, -(bits as i64))
    }
    fn to_fixed(self, bits: u32) -> BigInt {
        f64_to_fixed(self.hi, bits) + f64_to_fixed(self.lo, bits)
    }
}

/// `num / 2^bits` as `f64`, correct to within an ulp.
pub(crate) fn biguint_scaled_f64(num: &BigUint, bits: u32) -> f64 {
    scaled_f64(num, -(bits as i64))
}

/// `num * 2^exp` as `f64` (truncated to 64 leading bits first).
fn scaled_f64(num: &BigUint, exp: i64) -> f64 {
    let total = num.bits();
    if total == 0 {
        return 0.0;
    }
    let (mant, sh) = if total > 64 {
        let sh = total - 64;
        ((num >> sh).to_u64().unwrap_or(0), sh as i64)
    } else {
        (num.to_u64().unwrap_or(0), 0)
    };
    pow2_scale(mant as f64, sh + exp)
}

fn pow2_scale(x: f64, e: i64) -> f64 {
    // split the scaling so intermediate powers stay finite
    let mut r = x;
    let mut e = e;
    while e > 1000 {
        r *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        r *= 2f64.powi(-1000);
        e += 1000;
    }
    r * 2f64.powi(e as i32)
}

/// `num * 2^exp` as a double-double.
fn scaled_dd(num: &BigUint, exp: i64) -> Dd {
    let total = num.bits();
    if total <= 53 {
        return Dd::from(scaled_f64(num, exp));
    }
    let shift = total - 53;
    let top = num >> shift;
    let rest = num - (&top << shift);
    let hi = scaled_f64(&top, exp + shift as i64);
    let lo = scaled_f64(&rest, exp);
    Dd::sum(hi, lo)
}

/// Exact conversion of `x * 2^bits` rounded to an integer.
pub(crate) fn f64_to_fixed(x: f64, bits: u32) -> BigInt {
    if x == 0.0 || !x.is_finite() {
        return BigInt::zero();
    }
    let (mant, exp, sign) = num_traits::float::FloatCore::integer_decode(x);
    let m = BigInt::from(mant);
    let e = exp as i64 + bits as i64;
    let v = if e >= 0 {
        m << (e as usize)
    } else {
        let sh = (-e) as usize;
        if sh > 64 {
            BigInt::zero()
        } else {
            // round half away from zero
            (m + (BigInt::from(1u8) << (sh - 1))) >> sh
        }
    };
    if sign < 0 {
        -v
    } else {
        v
    }
}

/// Ratio `num / den` of two big integers as a double-double.
pub fn bigint_ratio(num: &BigInt, den: &BigInt) -> Dd {
    if num.is_zero() {
        return Dd::zero();
    }
    let keep = 110u64;
    let db = den.bits();
    let sh = db.saturating_sub(keep);
    let n = num >> sh;
    let d = den >> sh;
    bigint_to_dd(&n) / bigint_to_dd(&d)
}

/// Big integer as a double-double (exact up to 106 bits, no overflow guard).
pub fn bigint_to_dd(v: &BigInt) -> Dd {
    let (sign, mag) = (v.sign(), v.magnitude());
    let r = scaled_dd(mag, 0);
    if sign == Sign::Minus {
        -r
    } else {
        r
    }
}

fn inv_factorials() -> &'static [Dd; 32] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[Dd; 32]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [Dd::from(1.0); 32];
        for k in 1..32 {
            t[k] = t[k - 1] / Dd::from(k as f64);
        }
        t
    })
}

/// Sine and cosine in double-double, accurate to a few units of 1e-32 for
/// moderate arguments.
pub fn dd_sin_cos(x: Dd) -> (Dd, Dd) {
    let xh = x.hi;
    if !xh.is_finite() {
        return (Dd::from(f64::NAN), Dd::from(f64::NAN));
    }
    let k = (xh / std::f64::consts::FRAC_PI_2).round();
    let kd = Dd::from(k);
    let r = x - kd * PIO2_HI - Dd::from(k * PIO2_LO);
    let f = inv_factorials();
    let r2 = r * r;
    // sin r = r * sum (-1)^j r^{2j} / (2j+1)!
    let mut s = Dd::zero();
    let mut c = Dd::zero();
    for j in (0..14).rev() {
        let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
        s = s * r2 + f[2 * j + 1] * Dd::from(sgn);
        c = c * r2 + f[2 * j] * Dd::from(sgn);
    }
    s = s * r;
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // (x, sin hi, sin lo, cos hi, cos lo) from a 60-digit evaluation
    const CASES: &[(f64, f64, f64, f64, f64)] = &[
        (0.5, 0.479425538604203, -5.103969860556013e-18, 0.8775825618903728, -4.2623149864279997e-17),
        (1.0, 0.8414709848078965, 1.776845092935536e-18, 0.5403023058681398, -4.760954612604417e-17),
        (3.0, 0.1411200080598672, 8.577269787017502e-18, -0.9899924966004454, -4.2060261566099734e-17),
        (5.5, -0.7055403255703919, 1.7849628865181567e-17, 0.70866977429126, 9.365692374299323e-18),
        (-2.25, -0.7780731968879212, -3.792033215036389e-17, -0.6281736227227391, 4.4459337825557024e-17),
        (1e-3, 0.0009999998333333417, 5.670638989736153e-21, 0.9999995000000417, -7.831485455398128e-18),
        (12.0, -0.5365729180004349, -3.19871738204447e-17, 0.8438539587324921, -3.295262919928604e-17),
    ];

    #[test]
    fn dd_trig_matches_high_precision_values() {
        for &(x, sh, sl, ch, cl) in CASES {
            let (ds, dc) = dd_sin_cos(Dd::from(x));
            let es = ds - Dd::sum(sh, sl);
            let ec = dc - Dd::sum(ch, cl);
            assert!(es.hi().abs() < 1e-31, "sin {x}: {es:?}");
            assert!(ec.hi().abs() < 1e-31, "cos {x}: {ec:?}");
        }
    }

    #[test]
    fn dd_trig_pythagorean_identity_to_dd_precision() {
        for i in 0..200 {
            let x = Dd::from(-7.0 + 0.07 * i as f64) + Dd::from(1e-20 * i as f64);
            let (s, c) = dd_sin_cos(x);
            let e = s * s + c * c - Dd::from(1.0);
            assert!(e.hi().abs() < 1e-30, "x={x:?} err={e:?}");
        }
    }

    #[test]
    fn dd_sin_of_pi_is_tiny() {
        let (s, c) = dd_sin_cos(DD_PI);
        // the double-double pi differs from pi by ~1e-33
        assert!(s.hi().abs() < 1e-31);
        assert!((c + Dd::from(1.0)).hi().abs() < 1e-31);
    }

    #[test]
    fn fixed_point_roundtrip() {
        let bits = 200;
        let x = Dd::sum(0.3, 1.2345e-20);
        let k = x.to_fixed(bits);
        let back = Dd::from_fixed(k.magnitude(), bits);
        assert!((back - x).hi().abs() < 1e-31);
        assert_eq!(f64_to_fixed(-0.5, 4), BigInt::from(-8));
        assert_eq!(f64_to_fixed(0.75, 1), BigInt::from(2));
    }

    #[test]
    fn wrap_ranges() {
        assert!((23.1416f64.wrap_angle() - 4.2920).abs() < 1e-4);
        assert_eq!((-0.0f64).wrap_angle(), 0.0);
        let w = (-1e-300f64).wrap_angle();
        assert!((0.0..std::f64::consts::TAU).contains(&w));
        assert!((3.5f64.wrap_centered() - (3.5 - std::f64::consts::TAU)).abs() < 1e-15);
    }
}
