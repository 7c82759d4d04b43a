//! Closed real intervals with outward-rounded arithmetic.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::IntervalError;
use crate::scalar::Scalar;

/// A closed interval `[lo, hi]`.
///
/// The empty interval is encoded as `lo = +inf, hi = -inf`; no other
/// encoding with `lo > hi` is ever produced.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval<T: Scalar = f64> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    /// # Panics
    /// If `lo > hi` or either bound is NaN.
    pub fn new(lo: T, hi: T) -> Self {
        Self::try_new(lo, hi).unwrap_or_else(|| panic!("invalid interval [{lo}, {hi}]"))
    }

    pub fn try_new(lo: T, hi: T) -> Option<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            None
        } else {
            Some(Self { lo, hi })
        }
    }

    pub fn point(v: T) -> Self {
        Self::new(v, v)
    }

    pub fn empty() -> Self {
        Self {
            lo: T::infinity(),
            hi: T::neg_infinity(),
        }
    }

    pub fn entire() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn zero() -> Self {
        Self::point(T::zero())
    }

    pub fn one() -> Self {
        Self::point(T::one())
    }

    /// Smallest interval containing the exact value of `v`.
    pub fn from_f64(v: f64) -> Self {
        Self::new(T::from_f64_down(v), T::from_f64_up(v))
    }

    /// Outward conversion of `[lo, hi]` given in binary64.
    pub fn from_f64_bounds(lo: f64, hi: f64) -> Self {
        Self::new(T::from_f64_down(lo), T::from_f64_up(hi))
    }

    /// Enclosure of the integer `n`.
    pub fn from_usize(n: usize) -> Self {
        Self::from_f64_bounds(n as f64, n as f64)
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// `hi - lo`, rounded up.
    pub fn width(&self) -> T {
        if self.is_empty() {
            return T::zero();
        }
        T::sub_up(self.hi, self.lo)
    }

    /// Nearest floating-point midpoint; always inside the interval.
    pub fn mid(&self) -> T {
        let two = T::one() + T::one();
        if self.lo == T::neg_infinity() && self.hi == T::infinity() {
            return T::zero();
        }
        if self.lo == T::neg_infinity() {
            return T::min_value();
        }
        if self.hi == T::infinity() {
            return T::max_value();
        }
        let m = self.lo / two + self.hi / two;
        m.max(self.lo).min(self.hi)
    }

    /// Largest absolute value of a member.
    pub fn mag(&self) -> T {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(T::zero())
    }

    pub fn subset_of(&self, other: &Self) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    /// Closed-set intersection test; touching endpoints intersect.
    pub fn intersects(&self, other: &Self) -> bool {
        !self.is_empty() && !other.is_empty() && self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo > hi {
            Self::empty()
        } else {
            Self { lo, hi }
        }
    }

    pub fn hull(&self, other: &Self) -> Self {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Scales the radius by `factor` about the midpoint and pads by `abs`
    /// on each side.
    pub fn inflate(&self, factor: T, abs: T) -> Self {
        let r = T::mul_up(T::sub_up(self.hi, self.lo), factor) / (T::one() + T::one());
        let m = self.mid();
        let pad = T::add_up(r, abs);
        Self {
            lo: T::sub_down(m, pad).min(self.lo),
            hi: T::add_up(m, pad).max(self.hi),
        }
    }

    /// Widens both sides by `frac * width + abs`.
    pub fn widen(&self, frac: T, abs: T) -> Self {
        let pad = T::add_up(T::mul_up(self.width(), frac), abs);
        Self {
            lo: T::sub_down(self.lo, pad),
            hi: T::add_up(self.hi, pad),
        }
    }

    /// Splits at the midpoint. Both halves share the midpoint.
    pub fn split(&self) -> (Self, Self) {
        let m = self.mid();
        (Self { lo: self.lo, hi: m }, Self { lo: m, hi: self.hi })
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, IntervalError> {
        if self.is_empty() || rhs.is_empty() {
            return Ok(Self::empty());
        }
        if rhs.contains_zero() {
            return Err(IntervalError::DivisionByZero);
        }
        let (a, b) = (self, rhs);
        let lo = T::div_down(a.lo, b.lo)
            .min(T::div_down(a.lo, b.hi))
            .min(T::div_down(a.hi, b.lo))
            .min(T::div_down(a.hi, b.hi));
        let hi = T::div_up(a.lo, b.lo)
            .max(T::div_up(a.lo, b.hi))
            .max(T::div_up(a.hi, b.lo))
            .max(T::div_up(a.hi, b.hi));
        Ok(Self { lo, hi })
    }

    pub fn recip(&self) -> Result<Self, IntervalError> {
        Self::one().checked_div(self)
    }

    pub fn sqr(&self) -> Self {
        if self.is_empty() {
            return *self;
        }
        let a = self.lo.abs().min(self.hi.abs());
        let b = self.mag();
        let lo = if self.contains_zero() {
            T::zero()
        } else {
            T::mul_down(a, a)
        };
        Self {
            lo,
            hi: T::mul_up(b, b),
        }
    }

    /// Integer power with the tight range for even exponents.
    pub fn powi(&self, n: u32) -> Self {
        if self.is_empty() {
            return *self;
        }
        match n {
            0 => Self::one(),
            1 => *self,
            _ if n.is_multiple_of(2) => {
                let a = self.lo.abs().min(self.hi.abs());
                let b = self.mag();
                let lo = if self.contains_zero() {
                    T::zero()
                } else {
                    pow_down(a, n)
                };
                Self { lo, hi: pow_up(b, n) }
            }
            _ => Self {
                lo: odd_pow_down(self.lo, n),
                hi: odd_pow_up(self.hi, n),
            },
        }
    }

    pub fn sqrt(&self) -> Result<Self, IntervalError> {
        if self.is_empty() {
            return Ok(*self);
        }
        if self.lo < T::zero() {
            return Err(IntervalError::Domain("sqrt of an interval with a negative part"));
        }
        Ok(Self {
            lo: T::sqrt_down(self.lo),
            hi: T::sqrt_up(self.hi),
        })
    }

    pub fn exp(&self) -> Self {
        if self.is_empty() {
            return *self;
        }
        let lo = widen_down(self.lo.exp()).max(T::zero());
        let hi = widen_up(self.hi.exp());
        Self { lo, hi }
    }

    pub fn sin(&self) -> Self {
        self.periodic(T::zero())
    }

    pub fn cos(&self) -> Self {
        // cos(x) = sin(x + pi/2): shift the extremum grid instead of x
        self.periodic(T::one())
    }

    // Range of sin (phase = 0) or cos (phase = 1, in quarter turns).
    fn periodic(&self, phase: T) -> Self {
        if self.is_empty() {
            return *self;
        }
        let unit = Self::new(-T::one(), T::one());
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return unit;
        }
        let pi = Self::new(T::PI().pred(), T::PI().succ());
        let two = T::one() + T::one();
        let half_pi = Self::new(T::div_down(pi.lo, two), T::div_up(pi.hi, two));
        // quarter-turn coordinate q = x / (pi/2) (+1 for cos); maxima of sin
        // sit at q = 1 mod 4, minima at q = 3 mod 4
        let q = self.checked_div(&half_pi).expect("pi/2 is non-zero") + Self::point(phase);
        if T::sub_up(q.hi, q.lo) >= T::from_f64(4.0).unwrap() {
            return unit;
        }
        let eval = |x: T| {
            if phase.is_zero() {
                x.sin()
            } else {
                x.cos()
            }
        };
        let (a, b) = (eval(self.lo), eval(self.hi));
        let mut lo = widen_down(a.min(b)).max(-T::one());
        let mut hi = widen_up(a.max(b)).min(T::one());
        if contains_grid_point(q, 1) {
            hi = T::one();
        }
        if contains_grid_point(q, 3) {
            lo = -T::one();
        }
        Self { lo, hi }
    }
}

// Whether [q.lo, q.hi] may contain an integer congruent to `r` modulo 4.
fn contains_grid_point<T: Scalar>(q: Interval<T>, r: i64) -> bool {
    let four = T::from_f64(4.0).unwrap();
    let rr = T::from_i64(r).unwrap();
    let a = T::div_down(T::sub_down(q.lo, rr), four);
    let b = T::div_up(T::sub_up(q.hi, rr), four);
    a.ceil() <= b.floor()
}

// libm results are not correctly rounded; two ulps cover the documented
// error bounds of the platform implementations.
fn widen_down<T: Scalar>(v: T) -> T {
    v.pred().pred()
}

fn widen_up<T: Scalar>(v: T) -> T {
    v.succ().succ()
}

fn pow_down<T: Scalar>(a: T, n: u32) -> T {
    (1..n).fold(a, |acc, _| T::mul_down(acc, a))
}

fn pow_up<T: Scalar>(a: T, n: u32) -> T {
    (1..n).fold(a, |acc, _| T::mul_up(acc, a))
}

fn odd_pow_down<T: Scalar>(x: T, n: u32) -> T {
    if x >= T::zero() {
        pow_down(x, n)
    } else {
        -pow_up(-x, n)
    }
}

fn odd_pow_up<T: Scalar>(x: T, n: u32) -> T {
    if x >= T::zero() {
        pow_up(x, n)
    } else {
        -pow_down(-x, n)
    }
}

impl<T: Scalar> Default for Interval<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> Add for Interval<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        if self.is_empty() || rhs.is_empty() {
            return Self::empty();
        }
        Self {
            lo: T::add_down(self.lo, rhs.lo),
            hi: T::add_up(self.hi, rhs.hi),
        }
    }
}

impl<T: Scalar> Sub for Interval<T> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        if self.is_empty() || rhs.is_empty() {
            return Self::empty();
        }
        Self {
            lo: T::sub_down(self.lo, rhs.hi),
            hi: T::sub_up(self.hi, rhs.lo),
        }
    }
}

impl<T: Scalar> Mul for Interval<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        if self.is_empty() || rhs.is_empty() {
            return Self::empty();
        }
        let (a, b) = (self, rhs);
        let z = T::zero();
        // sign classes: only the doubly mixed case needs four products per bound
        let (lo, hi) = if a.lo >= z {
            if b.lo >= z {
                ((a.lo, b.lo), (a.hi, b.hi))
            } else if b.hi <= z {
                ((a.hi, b.lo), (a.lo, b.hi))
            } else {
                ((a.hi, b.lo), (a.hi, b.hi))
            }
        } else if a.hi <= z {
            if b.lo >= z {
                ((a.lo, b.hi), (a.hi, b.lo))
            } else if b.hi <= z {
                ((a.hi, b.hi), (a.lo, b.lo))
            } else {
                ((a.lo, b.hi), (a.lo, b.lo))
            }
        } else if b.lo >= z {
            ((a.lo, b.hi), (a.hi, b.hi))
        } else if b.hi <= z {
            ((a.hi, b.lo), (a.lo, b.lo))
        } else {
            return Self {
                lo: T::mul_down(a.lo, b.hi).min(T::mul_down(a.hi, b.lo)),
                hi: T::mul_up(a.lo, b.lo).max(T::mul_up(a.hi, b.hi)),
            };
        };
        Self {
            lo: T::mul_down(lo.0, lo.1),
            hi: T::mul_up(hi.0, hi.1),
        }
    }
}

impl<T: Scalar> Neg for Interval<T> {
    type Output = Self;

    fn neg(self) -> Self {
        if self.is_empty() {
            return self;
        }
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl<T: Scalar> fmt::Debug for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{:?}, {:?}]", self.lo, self.hi)
        }
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{},{}]", self.lo, self.hi)
        }
    }
}

/// Applies one of the four basic operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn interval_arith<T: Scalar>(a: Interval<T>, b: Interval<T>, op: ArithOp) -> Result<Interval<T>, IntervalError> {
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a.checked_div(&b)?,
    })
}
