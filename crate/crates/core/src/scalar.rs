//! Floating-point scalars with emulated directed rounding.
//!
//! Every operation first computes the round-to-nearest result and then
//! recovers the exact rounding error with an error-free transformation
//! (two-sum, fused multiply-add). The sign of that error tells whether the
//! nearest result already lies on the requested side of the exact value or
//! has to be moved by one ulp. This gives correctly rounded downward/upward
//! results without touching the FPU control word, which the Rust compiler
//! does not honour anyway.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// A binary floating-point type usable as interval endpoint.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Smallest representable value strictly greater than `self`.
    fn succ(self) -> Self;
    /// Largest representable value strictly smaller than `self`.
    fn pred(self) -> Self;

    /// Largest value of `Self` not greater than `v`.
    fn from_f64_down(v: f64) -> Self;
    /// Smallest value of `Self` not smaller than `v`.
    fn from_f64_up(v: f64) -> Self;

    /// Below this magnitude the error-free transformations may lose bits to
    /// underflow and a plain one-ulp step is used instead.
    fn tiny() -> Self {
        Self::min_positive_value() / Self::epsilon() / Self::epsilon()
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("integer not representable")
    }

    fn add_down(a: Self, b: Self) -> Self {
        let s = a + b;
        if !s.is_finite() {
            return overflow_down(s, a.is_finite() && b.is_finite());
        }
        let e = two_sum_err(a, b, s);
        if e < Self::zero() {
            s.pred()
        } else {
            s
        }
    }

    fn add_up(a: Self, b: Self) -> Self {
        let s = a + b;
        if !s.is_finite() {
            return overflow_up(s, a.is_finite() && b.is_finite());
        }
        let e = two_sum_err(a, b, s);
        if e > Self::zero() {
            s.succ()
        } else {
            s
        }
    }

    fn sub_down(a: Self, b: Self) -> Self {
        Self::add_down(a, -b)
    }

    fn sub_up(a: Self, b: Self) -> Self {
        Self::add_up(a, -b)
    }

    fn mul_down(a: Self, b: Self) -> Self {
        if a.is_zero() || b.is_zero() {
            return Self::zero();
        }
        let p = a * b;
        if !p.is_finite() {
            return overflow_down(p, a.is_finite() && b.is_finite());
        }
        if p.abs() < Self::tiny() {
            return p.pred();
        }
        let e = a.mul_add(b, -p);
        if e < Self::zero() {
            p.pred()
        } else {
            p
        }
    }

    fn mul_up(a: Self, b: Self) -> Self {
        if a.is_zero() || b.is_zero() {
            return Self::zero();
        }
        let p = a * b;
        if !p.is_finite() {
            return overflow_up(p, a.is_finite() && b.is_finite());
        }
        if p.abs() < Self::tiny() {
            return p.succ();
        }
        let e = a.mul_add(b, -p);
        if e > Self::zero() {
            p.succ()
        } else {
            p
        }
    }

    /// `a / b` rounded down; `b` must be non-zero.
    fn div_down(a: Self, b: Self) -> Self {
        if a.is_zero() {
            return Self::zero();
        }
        let q = a / b;
        if !q.is_finite() {
            return overflow_down(q, a.is_finite());
        }
        if q.abs() < Self::tiny() || a.abs() < Self::tiny() || b.is_infinite() {
            return q.pred();
        }
        // a = q*b + r exactly; a/b - q = r/b
        let r = (-q).mul_add(b, a);
        if (r < Self::zero()) != (b < Self::zero()) && !r.is_zero() {
            q.pred()
        } else {
            q
        }
    }

    fn div_up(a: Self, b: Self) -> Self {
        if a.is_zero() {
            return Self::zero();
        }
        let q = a / b;
        if !q.is_finite() {
            return overflow_up(q, a.is_finite());
        }
        if q.abs() < Self::tiny() || a.abs() < Self::tiny() || b.is_infinite() {
            return q.succ();
        }
        let r = (-q).mul_add(b, a);
        if (r > Self::zero()) == (b > Self::zero()) && !r.is_zero() {
            q.succ()
        } else {
            q
        }
    }

    /// Square root rounded down; `a >= 0`.
    fn sqrt_down(a: Self) -> Self {
        let s = a.sqrt();
        if s.is_zero() || !s.is_finite() {
            return s;
        }
        if a < Self::tiny() {
            return s.pred().max(Self::zero());
        }
        let r = (-s).mul_add(s, a);
        if r < Self::zero() {
            s.pred()
        } else {
            s
        }
    }

    fn sqrt_up(a: Self) -> Self {
        let s = a.sqrt();
        if !s.is_finite() {
            return s;
        }
        if a < Self::tiny() {
            return if a.is_zero() { s } else { s.succ() };
        }
        let r = (-s).mul_add(s, a);
        if r > Self::zero() {
            s.succ()
        } else {
            s
        }
    }
}

fn two_sum_err<T: Float>(a: T, b: T, s: T) -> T {
    let bp = s - a;
    let ap = s - bp;
    (a - ap) + (b - bp)
}

// Overflow of finite operands: round-to-nearest gives an infinity that is
// only a valid bound on one side.
fn overflow_down<T: Scalar>(v: T, finite_operands: bool) -> T {
    if finite_operands && v == T::infinity() {
        T::max_value()
    } else if v.is_nan() {
        T::neg_infinity()
    } else {
        v
    }
}

fn overflow_up<T: Scalar>(v: T, finite_operands: bool) -> T {
    if finite_operands && v == T::neg_infinity() {
        T::min_value()
    } else if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}

impl Scalar for f64 {
    fn succ(self) -> Self {
        self.next_up()
    }

    fn pred(self) -> Self {
        self.next_down()
    }

    fn from_f64_down(v: f64) -> Self {
        v
    }

    fn from_f64_up(v: f64) -> Self {
        v
    }
}

impl Scalar for f32 {
    fn succ(self) -> Self {
        self.next_up()
    }

    fn pred(self) -> Self {
        self.next_down()
    }

    fn from_f64_down(v: f64) -> Self {
        let r = v as f32;
        if (r as f64) > v {
            r.next_down()
        } else {
            r
        }
    }

    fn from_f64_up(v: f64) -> Self {
        let r = v as f32;
        if (r as f64) < v {
            r.next_up()
        } else {
            r
        }
    }
}
