//! Expression trees for mode right-hand sides.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::IntervalError;
use crate::interval::Interval;
use crate::scalar::Scalar;

/// A numeric literal together with a binary64 enclosure of the decimal it
/// was written as. `0.1` is not representable, so its enclosure is one ulp
/// wide; `0.5` encloses to a point.
#[derive(Clone)]
pub struct Literal {
    text: Arc<str>,
    value: f64,
    lo: f64,
    hi: f64,
}

impl Literal {
    /// Parses a decimal literal (`12`, `0.25`, `1.5e-3`).
    pub fn parse(text: &str) -> Option<Self> {
        let exact = decimal_to_rational(text)?;
        let value: f64 = text.parse().ok()?;
        if !value.is_finite() {
            return None;
        }
        let v = BigRational::from_float(value)?;
        let (lo, hi) = match v.cmp(&exact) {
            std::cmp::Ordering::Equal => (value, value),
            std::cmp::Ordering::Less => (value, value.next_up()),
            std::cmp::Ordering::Greater => (value.next_down(), value),
        };
        Some(Self {
            text: text.into(),
            value,
            lo,
            hi,
        })
    }

    /// Literal for a value given as a float; printed with its shortest
    /// round-trip representation.
    pub fn from_f64(v: f64) -> Self {
        let text = format!("{v:?}");
        Self::parse(&text).expect("finite float prints as a decimal")
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn enclosure<T: Scalar>(&self) -> Interval<T> {
        Interval::from_f64_bounds(self.lo, self.hi)
    }
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.lo == other.lo && self.hi == other.hi
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn decimal_to_rational(text: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let factor = num_traits::pow(BigInt::from(10), scale.unsigned_abs() as usize);
    Some(if scale >= 0 {
        BigRational::from_integer(digits * factor)
    } else {
        BigRational::new(digits, factor)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// State variable `x{i+1}`.
    State(usize),
    /// Disturbance `d{j+1}`.
    Dist(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(i) => write!(f, "x{}", i + 1),
            Var::Dist(j) => write!(f, "d{}", j + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl UnaryOp {
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Sqrt => Some("sqrt"),
        }
    }

    pub fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Literal),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    /// Power with a positive integer exponent.
    Pow(Box<Expr>, u32),
}

impl Expr {
    /// Negative values become `Neg(Const)`, as the grammar would parse them.
    pub fn constant(v: f64) -> Self {
        if v < 0.0 {
            Expr::unary(UnaryOp::Neg, Expr::Const(Literal::from_f64(-v)))
        } else {
            Expr::Const(Literal::from_f64(v))
        }
    }

    pub fn state(i: usize) -> Self {
        Expr::Var(Var::State(i))
    }

    pub fn dist(j: usize) -> Self {
        Expr::Var(Var::Dist(j))
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn pow(e: Expr, n: u32) -> Self {
        assert!(n >= 1, "exponent must be positive");
        Expr::Pow(Box::new(e), n)
    }

    /// Visits every variable occurrence.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Unary(_, a) | Expr::Pow(a, _) => a.for_each_var(f),
            Expr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Natural interval extension of the expression.
    pub fn eval<T: Scalar>(&self, x: &[Interval<T>], d: &[Interval<T>]) -> Result<Interval<T>, IntervalError> {
        Ok(match self {
            Expr::Const(c) => c.enclosure(),
            Expr::Var(Var::State(i)) => x[*i],
            Expr::Var(Var::Dist(j)) => d[*j],
            Expr::Unary(op, a) => {
                let a = a.eval(x, d)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Sqrt => a.sqrt()?,
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x, d)?, b.eval(x, d)?);
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a.checked_div(&b)?,
                }
            }
            Expr::Pow(a, n) => a.eval(x, d)?.powi(*n),
        })
    }

    /// Plain binary64 evaluation at a point.
    pub fn eval_point(&self, x: &[f64], d: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => c.value(),
            Expr::Var(Var::State(i)) => x[*i],
            Expr::Var(Var::Dist(j)) => d[*j],
            Expr::Unary(op, a) => {
                let a = a.eval_point(x, d);
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Exp => a.exp(),
                    UnaryOp::Sqrt => a.sqrt(),
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_point(x, d), b.eval_point(x, d));
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a / b,
                }
            }
            Expr::Pow(a, n) => a.eval_point(x, d).powi(*n as i32),
        }
    }
}

/// Fully parenthesized form; reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => f.write_str(c.text()),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.function_name().unwrap()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_enclosures() {
        let half = Literal::parse("0.5").unwrap();
        assert!(half.is_exact());
        let tenth = Literal::parse("0.1").unwrap();
        assert!(!tenth.is_exact());
        let e: Interval<f64> = tenth.enclosure();
        assert!(e.lo() < e.hi() && e.contains(0.1));
        assert!(Literal::parse("2.5e-3").is_some());
        assert!(Literal::parse("1e2").unwrap().is_exact());
        assert!(Literal::parse("abc").is_none());
        assert!(Literal::parse(".").is_none());
    }

    #[test]
    fn literal_enclosure_brackets_decimal() {
        for text in ["0.005", "0.05", "70", "1.55", "0.3333333333333333333", "12.5e-7"] {
            let lit = Literal::parse(text).unwrap();
            let exact = decimal_to_rational(text).unwrap();
            assert!(BigRational::from_float(lit.lo).unwrap() <= exact);
            assert!(BigRational::from_float(lit.hi).unwrap() >= exact);
        }
    }
}
