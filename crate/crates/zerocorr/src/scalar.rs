//! Minimal real-number abstraction so covariance formulas and the dense
//! reference path can run either in `f64` or in double-double precision.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use twofloat::TwoFloat;

/// Double-double number (about 32 significant digits).
///
/// Ring operations and square root come from [`TwoFloat`]. Division is long
/// division with two correction steps; the upstream quotient is only accurate
/// to double precision.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Dd(TwoFloat);

impl Dd {
    pub fn hi(self) -> f64 {
        self.0.hi()
    }
    pub fn lo(self) -> f64 {
        self.0.lo()
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd(TwoFloat::from(x))
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        Dd(self.0 + o.0)
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        Dd(self.0 - o.0)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        Dd(self.0 * o.0)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.0.hi() / o.0.hi();
        let r = self.0 - o.0 * q1;
        let q2 = r.hi() / o.0.hi();
        let r = r - o.0 * q2;
        let q3 = r.hi() / o.0.hi();
        Dd(TwoFloat::from(q1) + q2 + q3)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd(-self.0)
    }
}

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

impl Real for Dd {
    fn from_f64(x: f64) -> Self {
        Dd::from(x)
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn sqrt(self) -> Self {
        Dd(self.0.sqrt())
    }
    fn exp(self) -> Self {
        dd_exp(self)
    }
    fn abs(self) -> Self {
        if self.hi() < 0.0 { -self } else { self }
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { Dd::from(1.0) / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Dd::from(1.0);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }
}

/// exp in double-double by halving, a short Taylor series, and squaring back.
fn dd_exp(x: Dd) -> Dd {
    let xf = x.hi();
    if xf == 0.0 && x.lo() == 0.0 {
        return Dd::from(1.0);
    }
    let mut m = 0;
    let mut scale = 1.0;
    while xf.abs() * scale > 1.0 / 1024.0 {
        scale *= 0.5;
        m += 1;
    }
    let r = x * Dd::from(scale);
    // Work with exp(r) − 1 so the squarings do not lose the small part.
    let mut term = r;
    let mut em1 = r;
    for k in 2..=16 {
        term = term * r / Dd::from(k as f64);
        em1 = em1 + term;
    }
    for _ in 0..m {
        em1 = em1 * (Dd::from(2.0) + em1);
    }
    Dd::from(1.0) + em1
}
