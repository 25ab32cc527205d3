//! Fixed-point reals for long chaotic orbits: [`Mp`] with 400 fractional
//! bits and [`MpWide`] with 900 for orbits whose base is coupled to the
//! fiber.

use std::cmp::Ordering;
use std::fmt::{self, Debug};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

use bnum::cast::As;
use bnum::types::{I1024, I2048, I512, U1024, U512};
use num_bigint::{BigInt, BigUint, Sign};

use crate::real::Real;

/// Fractional bits of [`Mp`].
pub const FRAC: u32 = 400;
/// Fractional bits of [`MpWide`].
pub const WIDE_FRAC: u32 = 900;

fn f64_scale(e: i32) -> f64 {
    2f64.powi(e)
}

macro_rules! fixed_real {
    ($(#[$doc:meta])* $name:ident, $int:ty, $wide:ty, $uint:ty, $width:expr, $frac:expr, $terms:expr) => {
        $(#[$doc])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash)]
        pub struct $name($int);

        impl $name {
            const FRAC: u32 = $frac;

            fn small(k: i64) -> Self {
                $name(<$int>::from(k) << Self::FRAC)
            }

            fn div_small(self, k: i64) -> Self {
                $name(self.0 / <$int>::from(k))
            }

            fn sin_cos(self) -> ($name, $name) {
                let c = Self::consts();
                // nearest multiple of pi/2
                let q = (self / c.half_pi + Self::of(0.5)).floor();
                let r = self - q * c.half_pi;
                let k = ((q.0 >> Self::FRAC).as_::<i64>()).rem_euclid(4);
                let r2 = r * r;
                let fact = &c.inv_fact;
                let top = (fact.len() - 2) / 2;
                let mut sn = Self::zero();
                let mut cs = Self::zero();
                for m in (0..=top).rev() {
                    let (a, b) = (fact[2 * m + 1], fact[2 * m]);
                    let (a, b) = if m % 2 == 0 { (a, b) } else { (-a, -b) };
                    sn = sn * r2 + a;
                    cs = cs * r2 + b;
                }
                let (s, co) = (sn * r, cs);
                match k {
                    0 => (s, co),
                    1 => (co, -s),
                    2 => (-s, -co),
                    _ => (-co, s),
                }
            }

            fn atan_inv(k: i64) -> Self {
                // atan(1/k) = sum (-1)^j / ((2j+1) k^{2j+1})
                let mut pow = Self::small(1).div_small(k);
                let k2 = k * k;
                let mut sum = Self::zero();
                let mut j = 0i64;
                while pow.0 != <$int>::ZERO {
                    let term = pow.div_small(2 * j + 1);
                    sum = if j % 2 == 0 { sum + term } else { sum - term };
                    pow = pow.div_small(k2);
                    j += 1;
                }
                sum
            }

            fn consts() -> &'static Consts<$name> {
                static C: OnceLock<Consts<$name>> = OnceLock::new();
                C.get_or_init(|| {
                    let pi = Self::atan_inv(5) * Self::small(16) - Self::atan_inv(239) * Self::small(4);
                    let mut inv_fact = vec![Self::small(1)];
                    for k in 1..$terms {
                        let prev = inv_fact[k - 1];
                        inv_fact.push(prev.div_small(k as i64));
                    }
                    Consts { pi, two_pi: pi + pi, half_pi: pi.div_small(2), inv_fact }
                })
            }
        }

        impl Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({:e})", stringify!($name), self.hi())
            }
        }

        impl PartialOrd for $name {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.0.cmp(&o.0))
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, o: $name) -> $name {
                $name(self.0 + o.0)
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, o: $name) -> $name {
                $name(self.0 - o.0)
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-self.0)
            }
        }

        impl Mul for $name {
            type Output = $name;
            fn mul(self, o: $name) -> $name {
                let p = self.0.as_::<$wide>() * o.0.as_::<$wide>();
                let half = <$wide>::ONE << (Self::FRAC - 1);
                $name(((p + half) >> Self::FRAC).as_::<$int>())
            }
        }

        impl Div for $name {
            type Output = $name;
            fn div(self, o: $name) -> $name {
                let n = self.0.as_::<$wide>() << Self::FRAC;
                $name((n / o.0.as_::<$wide>()).as_::<$int>())
            }
        }

        impl Real for $name {
            fn of(x: f64) -> Self {
                // exact: mantissa times a power of two, rounded only below 2^-FRAC
                let raw = x.abs().to_bits();
                let exp = (raw >> 52) as i32;
                let man = raw & ((1u64 << 52) - 1);
                let (m, e) = if exp == 0 { (man, -1074) } else { (man | 1 << 52, exp - 1075) };
                let shift = e + Self::FRAC as i32;
                let m = m.as_::<$int>();
                let v = if shift >= 0 {
                    m << shift as u32
                } else if shift > -54 {
                    (m + (<$int>::ONE << (-shift - 1) as u32)) >> (-shift) as u32
                } else {
                    <$int>::ZERO
                };
                $name(if x < 0.0 { -v } else { v })
            }
            fn hi(self) -> f64 {
                let neg = self.0.is_negative();
                let a = if neg { -self.0 } else { self.0 };
                let v = a.as_::<$uint>();
                let bits = $width - v.leading_zeros();
                let r = if bits <= 64 {
                    v.as_::<u64>() as f64 * f64_scale(-(Self::FRAC as i32))
                } else {
                    let sh = bits - 64;
                    (v >> sh).as_::<u64>() as f64 * f64_scale(sh as i32 - Self::FRAC as i32)
                };
                if neg {
                    -r
                } else {
                    r
                }
            }
            fn sine(self) -> Self {
                self.sin_cos().0
            }
            fn cosine(self) -> Self {
                self.sin_cos().1
            }
            fn floor(self) -> Self {
                $name((self.0 >> Self::FRAC) << Self::FRAC)
            }
            fn sqrt(self) -> Self {
                if self.0 <= <$int>::ZERO {
                    return Self::zero();
                }
                let mut y = Self::of(self.hi().sqrt());
                // quadratic convergence from 53 bits
                let mut good = 50u32;
                while good < Self::FRAC + 8 {
                    y = (y + self / y).div_small(2);
                    good *= 2;
                }
                y
            }
            fn two_pi() -> Self {
                Self::consts().two_pi
            }
            fn pi() -> Self {
                Self::consts().pi
            }
            fn zero() -> Self {
                $name(<$int>::ZERO)
            }
            fn from_fixed(num: &BigUint, bits: u32) -> Self {
                let v = if bits >= Self::FRAC {
                    let sh = bits - Self::FRAC;
                    let half = if sh > 0 { BigUint::from(1u8) << (sh - 1) } else { BigUint::from(0u8) };
                    (num + half) >> sh
                } else {
                    num << (Self::FRAC - bits)
                };
                let bytes = v.to_bytes_le();
                let u = <$uint>::from_le_slice(&bytes).expect("fixed-point value exceeds range");
                $name(u.as_::<$int>())
            }
            fn to_fixed(self, bits: u32) -> BigInt {
                let neg = self.0.is_negative();
                let a = if neg { -self.0 } else { self.0 };
                let bytes: Vec<u8> = a.as_::<$uint>().digits().iter().flat_map(|d| d.to_le_bytes()).collect();
                let mag = BigUint::from_bytes_le(&bytes);
                let scaled = if bits >= Self::FRAC {
                    mag << (bits - Self::FRAC)
                } else {
                    let sh = Self::FRAC - bits;
                    (mag + (BigUint::from(1u8) << (sh - 1))) >> sh
                };
                BigInt::from_biguint(if neg { Sign::Minus } else { Sign::Plus }, scaled)
            }
        }
    };
}

struct Consts<T> {
    pi: T,
    two_pi: T,
    half_pi: T,
    /// `1/k!` for the series terms.
    inv_fact: Vec<T>,
}

fixed_real!(
    /// Signed value `raw / 2^400`; about 111 integer bits of range.
    Mp, I512, I1024, U512, 512, FRAC, 80
);

fixed_real!(
    /// Signed value `raw / 2^900`; about 123 integer bits of range.
    MpWide, I1024, I2048, U1024, 1024, WIDE_FRAC, 170
);
