//! Boxes: Cartesian products of intervals.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::BoxError;
use crate::interval::Interval;
use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct IntervalBox<T: Scalar = f64> {
    dims: Vec<Interval<T>>,
}

/// Result of comparing two boxes as closed sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetRelation {
    pub subset: bool,
    pub intersects: bool,
}

impl<T: Scalar> IntervalBox<T> {
    pub fn new(dims: Vec<Interval<T>>) -> Self {
        Self { dims }
    }

    pub fn from_bounds(bounds: &[(T, T)]) -> Self {
        Self::new(bounds.iter().map(|&(lo, hi)| Interval::new(lo, hi)).collect())
    }

    /// Degenerate box holding a single point.
    pub fn point(x: &[T]) -> Self {
        Self::new(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn intervals(&self) -> &[Interval<T>] {
        &self.dims
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interval<T>> {
        self.dims.iter()
    }

    pub fn into_intervals(self) -> Vec<Interval<T>> {
        self.dims
    }

    pub fn is_empty(&self) -> bool {
        !self.dims.is_empty() && self.dims.iter().any(Interval::is_empty)
    }

    pub fn widths(&self) -> Vec<T> {
        self.dims.iter().map(Interval::width).collect()
    }

    pub fn max_width(&self) -> T {
        self.dims.iter().map(Interval::width).fold(T::zero(), |a, b| a.max(b))
    }

    pub fn midpoint(&self) -> Vec<T> {
        self.dims.iter().map(Interval::mid).collect()
    }

    pub fn contains_point(&self, x: &[T]) -> bool {
        x.len() == self.dim() && self.dims.iter().zip(x).all(|(i, &v)| i.contains(v))
    }

    fn check_dim(&self, other: &Self) -> Result<(), BoxError> {
        if self.dim() != other.dim() {
            return Err(BoxError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn subset_of(&self, other: &Self) -> Result<bool, BoxError> {
        self.check_dim(other)?;
        Ok(self.dims.iter().zip(&other.dims).all(|(a, b)| a.subset_of(b)))
    }

    /// Closed-set intersection; boxes sharing only a facet intersect.
    pub fn intersects(&self, other: &Self) -> Result<bool, BoxError> {
        self.check_dim(other)?;
        Ok(self.dims.iter().zip(&other.dims).all(|(a, b)| a.intersects(b)))
    }

    pub fn relation(&self, other: &Self) -> Result<SetRelation, BoxError> {
        Ok(SetRelation {
            subset: self.subset_of(other)?,
            intersects: self.intersects(other)?,
        })
    }

    pub fn intersect(&self, other: &Self) -> Result<Self, BoxError> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a.intersect(b)))
    }

    pub fn hull(&self, other: &Self) -> Result<Self, BoxError> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a.hull(b)))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&Interval<T>, &Interval<T>) -> Interval<T>) -> Self {
        Self::new(self.dims.iter().zip(&other.dims).map(|(a, b)| f(a, b)).collect())
    }

    pub fn map(&self, f: impl Fn(&Interval<T>) -> Interval<T>) -> Self {
        Self::new(self.dims.iter().map(f).collect())
    }

    /// Index of the widest dimension; ties go to the lowest index.
    pub fn widest_dim(&self) -> usize {
        let mut best = 0;
        let mut best_w = T::neg_infinity();
        for (i, d) in self.dims.iter().enumerate() {
            let w = d.width();
            if w > best_w {
                best = i;
                best_w = w;
            }
        }
        best
    }

    /// Splits along the widest dimension at its midpoint.
    pub fn bisect(&self) -> Result<(Self, Self), BoxError> {
        if self.dims.is_empty() || self.is_empty() || self.max_width() <= T::zero() {
            return Err(BoxError::DegenerateBox);
        }
        let k = self.widest_dim();
        let (a, b) = self.dims[k].split();
        let mut left = self.clone();
        let mut right = self.clone();
        left.dims[k] = a;
        right.dims[k] = b;
        Ok((left, right))
    }

    /// Halves every dimension of positive width, giving up to `2^n` boxes.
    /// Dimension 0 varies slowest.
    pub fn split_all(&self) -> Result<Vec<Self>, BoxError> {
        if self.dims.is_empty() || self.is_empty() || self.max_width() <= T::zero() {
            return Err(BoxError::DegenerateBox);
        }
        let mut parts = vec![self.clone()];
        for k in 0..self.dims.len() {
            if self.dims[k].width() <= T::zero() {
                continue;
            }
            parts = parts
                .into_iter()
                .flat_map(|b| {
                    let (lo, hi) = b.dims[k].split();
                    let mut left = b.clone();
                    let mut right = b;
                    left.dims[k] = lo;
                    right.dims[k] = hi;
                    [left, right]
                })
                .collect();
        }
        Ok(parts)
    }

    /// Outward conversion to another scalar type.
    pub fn cast<U: Scalar>(&self) -> IntervalBox<U> {
        IntervalBox::new(
            self.dims
                .iter()
                .map(|i| {
                    let lo = i.lo().to_f64().unwrap();
                    let hi = i.hi().to_f64().unwrap();
                    Interval::from_f64_bounds(lo, hi)
                })
                .collect(),
        )
    }

    pub fn to_f64_bounds(&self) -> Vec<(f64, f64)> {
        self.dims
            .iter()
            .map(|i| (i.lo().to_f64().unwrap(), i.hi().to_f64().unwrap()))
            .collect()
    }
}

impl<T: Scalar> Index<usize> for IntervalBox<T> {
    type Output = Interval<T>;

    fn index(&self, i: usize) -> &Interval<T> {
        &self.dims[i]
    }
}

impl<T: Scalar> FromIterator<Interval<T>> for IntervalBox<T> {
    fn from_iter<I: IntoIterator<Item = Interval<T>>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl<T: Scalar> fmt::Debug for IntervalBox<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|i| format!("{i:?}")).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Prints the literal syntax `[lo,hi]x[lo,hi]` with round-trip decimals.
impl<T: Scalar> fmt::Display for IntervalBox<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.dims.iter().enumerate() {
            if k > 0 {
                f.write_str("x")?;
            }
            write!(f, "[{},{}]", i.lo(), i.hi())?;
        }
        Ok(())
    }
}

/// Parses `[lo,hi]x[lo,hi]...`; whitespace is ignored and bounds must be
/// plain decimal literals.
impl FromStr for IntervalBox<f64> {
    type Err = BoxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(BoxError::Parse("empty box literal".into()));
        }
        let mut dims = Vec::new();
        let mut rest = compact.as_str();
        loop {
            let body = rest
                .strip_prefix('[')
                .ok_or_else(|| BoxError::Parse(format!("expected '[' in {s:?}")))?;
            let close = body
                .find(']')
                .ok_or_else(|| BoxError::Parse(format!("missing ']' in {s:?}")))?;
            let (lo, hi) = body[..close]
                .split_once(',')
                .ok_or_else(|| BoxError::Parse(format!("expected 'lo,hi' in {s:?}")))?;
            let lo = parse_decimal(lo)?;
            let hi = parse_decimal(hi)?;
            let iv = Interval::try_new(lo, hi)
                .ok_or_else(|| BoxError::Parse(format!("lower bound exceeds upper bound in {s:?}")))?;
            dims.push(iv);
            rest = &body[close + 1..];
            if rest.is_empty() {
                break;
            }
            rest = rest
                .strip_prefix('x')
                .ok_or_else(|| BoxError::Parse(format!("expected 'x' between intervals in {s:?}")))?;
        }
        Ok(Self::new(dims))
    }
}

fn parse_decimal(s: &str) -> Result<f64, BoxError> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    let valid = !digits.is_empty()
        && digits.chars().all(|c| c.is_ascii_digit() || c == '.')
        && digits.chars().filter(|&c| c == '.').count() <= 1
        && digits.chars().any(|c| c.is_ascii_digit());
    if !valid {
        return Err(BoxError::Parse(format!("not a decimal literal: {s:?}")));
    }
    s.parse::<f64>().map_err(|e| BoxError::Parse(format!("{s:?}: {e}")))
}

/// Serialized as `[[lo,hi],...]`.
impl Serialize for IntervalBox<f64> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_f64_bounds()
            .iter()
            .map(|&(lo, hi)| [lo, hi])
            .collect::<Vec<_>>()
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntervalBox<f64> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(deserializer)?;
        raw.into_iter()
            .map(|[lo, hi]| {
                Interval::try_new(lo, hi)
                    .ok_or_else(|| serde::de::Error::custom(format!("invalid interval [{lo},{hi}]")))
            })
            .collect()
    }
}
