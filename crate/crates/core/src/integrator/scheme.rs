use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::scalar::Scalar;

/// Explicit Runge-Kutta tableau with rational coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ButcherScheme {
    Euler,
    Heun,
    #[default]
    Rk4,
}

type Ratio = (i64, u64);

const EULER_A: [Ratio; 1] = [(0, 1)];
const EULER_B: [Ratio; 1] = [(1, 1)];
const EULER_C: [Ratio; 1] = [(0, 1)];

const HEUN_A: [Ratio; 4] = [(0, 1), (0, 1), (1, 1), (0, 1)];
const HEUN_B: [Ratio; 2] = [(1, 2), (1, 2)];
const HEUN_C: [Ratio; 2] = [(0, 1), (1, 1)];

#[rustfmt::skip]
const RK4_A: [Ratio; 16] = [
    (0, 1), (0, 1), (0, 1), (0, 1),
    (1, 2), (0, 1), (0, 1), (0, 1),
    (0, 1), (1, 2), (0, 1), (0, 1),
    (0, 1), (0, 1), (1, 1), (0, 1),
];
const RK4_B: [Ratio; 4] = [(1, 6), (1, 3), (1, 3), (1, 6)];
const RK4_C: [Ratio; 4] = [(0, 1), (1, 2), (1, 2), (1, 1)];

fn enclose<T: Scalar>((num, den): Ratio) -> Interval<T> {
    let n = Interval::<T>::from_usize(num.unsigned_abs() as usize);
    let q = n
        .checked_div(&Interval::from_usize(den as usize))
        .expect("nonzero denominator");
    if num < 0 {
        -q
    } else {
        q
    }
}

impl ButcherScheme {
    pub const ALL: [ButcherScheme; 3] = [ButcherScheme::Euler, ButcherScheme::Heun, ButcherScheme::Rk4];

    pub fn name(self) -> &'static str {
        match self {
            ButcherScheme::Euler => "euler",
            ButcherScheme::Heun => "heun",
            ButcherScheme::Rk4 => "rk4",
        }
    }

    pub fn stages(self) -> usize {
        self.b_raw().len()
    }

    pub fn order(self) -> usize {
        match self {
            ButcherScheme::Euler => 1,
            ButcherScheme::Heun => 2,
            ButcherScheme::Rk4 => 4,
        }
    }

    fn a_raw(self) -> &'static [Ratio] {
        match self {
            ButcherScheme::Euler => &EULER_A,
            ButcherScheme::Heun => &HEUN_A,
            ButcherScheme::Rk4 => &RK4_A,
        }
    }

    fn b_raw(self) -> &'static [Ratio] {
        match self {
            ButcherScheme::Euler => &EULER_B,
            ButcherScheme::Heun => &HEUN_B,
            ButcherScheme::Rk4 => &RK4_B,
        }
    }

    fn c_raw(self) -> &'static [Ratio] {
        match self {
            ButcherScheme::Euler => &EULER_C,
            ButcherScheme::Heun => &HEUN_C,
            ButcherScheme::Rk4 => &RK4_C,
        }
    }

    /// Exact rational coefficient `a_ij` as `(numerator, denominator)`.
    pub fn a_ratio(self, i: usize, j: usize) -> (i64, u64) {
        self.a_raw()[i * self.stages() + j]
    }

    pub fn b_ratio(self, i: usize) -> (i64, u64) {
        self.b_raw()[i]
    }

    pub fn c_ratio(self, i: usize) -> (i64, u64) {
        self.c_raw()[i]
    }

    /// Enclosures of the coefficients: `(a, b)` with `a` row-major.
    pub fn tableau<T: Scalar>(self) -> (Vec<Interval<T>>, Vec<Interval<T>>) {
        (
            self.a_raw().iter().map(|&r| enclose(r)).collect(),
            self.b_raw().iter().map(|&r| enclose(r)).collect(),
        )
    }

    /// Nearest binary64 values of `(a, b, c)` for non-validated stepping.
    pub fn tableau_f64(self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let f = |&(n, d): &Ratio| n as f64 / d as f64;
        (
            self.a_raw().iter().map(f).collect(),
            self.b_raw().iter().map(f).collect(),
            self.c_raw().iter().map(f).collect(),
        )
    }
}

impl fmt::Display for ButcherScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ButcherScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ButcherScheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scheme '{s}' (expected euler, heun or rk4)"))
    }
}
