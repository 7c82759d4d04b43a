use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::ibox::IntervalBox;
use crate::integrator::IntegratorConfig;
use crate::model::SwitchedSystem;

/// How a cell is divided when no pattern controls it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStrategy {
    /// Halve the widest dimension (two children).
    #[default]
    Longest,
    /// Halve every dimension at once (`2^n` children).
    All,
}

impl SplitStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SplitStrategy::Longest => "longest",
            SplitStrategy::All => "all",
        }
    }

    pub fn split(self, w: &IntervalBox) -> Option<Vec<IntervalBox>> {
        match self {
            SplitStrategy::Longest => w.bisect().ok().map(|(a, b)| vec![a, b]),
            SplitStrategy::All => w.split_all().ok(),
        }
    }
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SplitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "longest" => Ok(SplitStrategy::Longest),
            "all" => Ok(SplitStrategy::All),
            _ => Err(format!("unknown split strategy '{s}' (expected longest or all)")),
        }
    }
}

/// Recurrence (or reach) set, safety set, obstacle and search bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisProblem {
    pub r: IntervalBox,
    pub target: IntervalBox,
    pub s: IntervalBox,
    pub b: Option<IntervalBox>,
    /// Maximum pattern length.
    pub k: usize,
    /// Maximum bisection depth.
    pub d: usize,
    #[serde(default)]
    pub split: SplitStrategy,
    #[serde(default)]
    pub integrator: IntegratorConfig,
}

impl SynthesisProblem {
    /// Recurrence problem: the target is `r` itself.
    pub fn new(
        r: IntervalBox,
        s: IntervalBox,
        b: Option<IntervalBox>,
        k: usize,
        d: usize,
    ) -> Result<Self, SynthesisError> {
        let p = Self {
            target: r.clone(),
            r,
            s,
            b,
            k,
            d,
            split: SplitStrategy::default(),
            integrator: IntegratorConfig::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_target(mut self, target: IntervalBox) -> Result<Self, SynthesisError> {
        self.target = target;
        self.validate()?;
        Ok(self)
    }

    pub fn with_split(mut self, split: SplitStrategy) -> Self {
        self.split = split;
        self
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Self {
        self.integrator = cfg;
        self
    }

    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: String| Err(SynthesisError::InvalidProblem(m));
        let n = self.r.dim();
        if n == 0 {
            return bad("R has dimension 0".into());
        }
        let mut named = vec![("target", &self.target), ("S", &self.s)];
        if let Some(b) = &self.b {
            named.push(("B", b));
        }
        for (name, bx) in &named {
            if bx.dim() != n {
                return bad(format!("{name} has dimension {}, R has {n}", bx.dim()));
            }
        }
        for (name, bx) in [("R", &self.r)].iter().chain(&named) {
            if bx.is_empty() {
                return bad(format!("{name} is empty"));
            }
        }
        if !self.r.subset_of(&self.s)? {
            return bad(format!("R = {} is not contained in S = {}", self.r, self.s));
        }
        if let Some(b) = &self.b {
            if !b.subset_of(&self.s)? {
                return bad(format!("B = {b} is not contained in S = {}", self.s));
            }
            if self.r.intersects(b)? {
                return bad(format!("R = {} intersects B = {b}", self.r));
            }
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        Ok(())
    }

    /// Checks the problem against a model's dimension.
    pub fn check_system(&self, sys: &SwitchedSystem) -> Result<(), SynthesisError> {
        if sys.dim() != self.dim() {
            return Err(SynthesisError::InvalidProblem(format!(
                "problem has dimension {}, model '{}' has {}",
                self.dim(),
                sys.name(),
                sys.dim()
            )));
        }
        Ok(())
    }
}
