//! Executable switching controllers built from a decomposition.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ibox::IntervalBox;
use crate::integrator::{ButcherScheme, ReferenceIntegrator};
use crate::model::{parse_model, ModelError, SwitchedSystem};
use crate::synthesis::{Cell, Decomposition, Pattern, SynthesisProblem};

pub const FORMAT_VERSION: &str = "1.0";

/// Reference RK4 steps per sampling period in closed-loop simulation.
pub const SUBSTEPS: usize = 20;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("state {x:?} at t = {t} lies outside every cell")]
    OutsideDomain { t: f64, x: Vec<f64> },
    #[error("malformed controller file: {0}")]
    Format(String),
    #[error("controller format version {found} is not compatible with {FORMAT_VERSION}")]
    VersionMismatch { found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerMeta {
    pub system: String,
    pub tau: f64,
    pub k: usize,
    pub d: usize,
    pub scheme: ButcherScheme,
    pub lte_tol: f64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub format_version: String,
    pub meta: ControllerMeta,
    pub problem: SynthesisProblem,
    pub cells: Vec<Cell>,
    /// Text of the model the controller was synthesized for.
    pub model: Option<String>,
}

impl Controller {
    pub fn new(sys: &SwitchedSystem, dec: Decomposition) -> Result<Self, ControllerError> {
        let p = &dec.problem;
        let ctl = Self {
            format_version: FORMAT_VERSION.into(),
            meta: ControllerMeta {
                system: sys.name().into(),
                tau: sys.tau(),
                k: p.k,
                d: p.d,
                scheme: p.integrator.scheme,
                lte_tol: p.integrator.lte_tol,
                version: env!("CARGO_PKG_VERSION").into(),
            },
            problem: dec.problem,
            cells: dec.cells,
            model: sys.source().map(str::to_owned),
        };
        ctl.validate()?;
        Ok(ctl)
    }

    fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::Format(m));
        let major = |v: &str| v.split('.').next().map(str::to_owned);
        if major(&self.format_version) != major(FORMAT_VERSION) {
            return Err(ControllerError::VersionMismatch {
                found: self.format_version.clone(),
            });
        }
        if self.cells.is_empty() {
            return bad("no cells".into());
        }
        if self.meta.tau.is_nan() || self.meta.tau <= 0.0 {
            return bad(format!("tau must be positive, got {}", self.meta.tau));
        }
        if let Err(e) = self.problem.validate() {
            return bad(e.to_string());
        }
        for (i, c) in self.cells.iter().enumerate() {
            if c.pattern.is_empty() || c.pattern.contains(&0) {
                return bad(format!("cell {i} has an invalid pattern '{}'", c.pattern));
            }
            if c.region.dim() != self.problem.dim() || c.region.is_empty() {
                return bad(format!("cell {i} region {} does not match the problem", c.region));
            }
        }
        Ok(())
    }

    pub fn decomposition(&self) -> Decomposition {
        Decomposition {
            cells: self.cells.clone(),
            problem: self.problem.clone(),
        }
    }

    /// Model embedded in the file, if any.
    pub fn system(&self) -> Result<Option<SwitchedSystem>, ControllerError> {
        self.model.as_deref().map(parse_model).transpose().map_err(Into::into)
    }

    /// Pattern of the first cell containing `x`.
    pub fn lookup(&self, x: &[f64]) -> Option<&Pattern> {
        self.cells
            .iter()
            .find(|c| c.region.contains_point(x))
            .map(|c| &c.pattern)
    }

    /// Canonical JSON: sorted keys, shortest round-trip floats, trailing newline.
    pub fn to_json(&self) -> String {
        let v = serde_json::to_value(self).expect("controller serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ControllerError> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| ControllerError::Format(e.to_string()))?;
        if let Some(found) = v.get("format_version").and_then(|f| f.as_str()) {
            if found.split('.').next() != FORMAT_VERSION.split('.').next() {
                return Err(ControllerError::VersionMismatch { found: found.into() });
            }
        }
        let ctl: Self = serde_json::from_value(v).map_err(|e| ControllerError::Format(e.to_string()))?;
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn save(&self, path: &Path) -> Result<(), ControllerError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ControllerError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub x: Vec<f64>,
    /// Mode active on the step ending at `t` (first mode for the initial point).
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub points: Vec<TracePoint>,
    /// States at the end of each pattern.
    pub endpoints: Vec<Vec<f64>>,
    pub patterns: Vec<Pattern>,
}

impl Trace {
    /// `t,x1,...,xn,mode`
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, |p| p.x.len());
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push_str(",mode\n");
        for p in &self.points {
            let _ = write!(out, "{:?}", p.t);
            for v in &p.x {
                let _ = write!(out, ",{v:?}");
            }
            let _ = writeln!(out, ",{}", p.mode);
        }
        out
    }
}

fn sample_box(b: &IntervalBox, rng: &mut ChaCha8Rng) -> Vec<f64> {
    b.iter()
        .map(|iv| {
            if iv.width() > 0.0 {
                rng.random_range(iv.lo()..=iv.hi())
            } else {
                iv.lo()
            }
        })
        .collect()
}

/// Applies `n_patterns` patterns from `x0`, cycling through `ctls` (one
/// controller for recurrence, several for reach sequences). The disturbance
/// is drawn uniformly from the model's box once per sampling period.
pub fn simulate_closed_loop(
    sys: &SwitchedSystem,
    ctls: &[&Controller],
    x0: &[f64],
    n_patterns: usize,
    seed: u64,
) -> Result<Trace, ControllerError> {
    assert!(!ctls.is_empty(), "at least one controller is required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut integrators: Vec<_> = (1..=sys.n_modes()).map(|m| ReferenceIntegrator::new(sys, m)).collect();
    let h = sys.tau() / SUBSTEPS as f64;
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut trace = Trace::default();
    for j in 0..n_patterns {
        let ctl = ctls[j % ctls.len()];
        let pat = ctl
            .lookup(&x)
            .ok_or_else(|| ControllerError::OutsideDomain { t, x: x.clone() })?
            .clone();
        if trace.points.is_empty() {
            trace.points.push(TracePoint {
                t,
                x: x.clone(),
                mode: pat[0],
            });
        }
        for &mode in pat.iter() {
            let d = sample_box(sys.dist_box(), &mut rng);
            let start = t;
            for s in 1..=SUBSTEPS {
                integrators[mode - 1].step(&mut x, &d, h);
                t = start + s as f64 * h;
                trace.points.push(TracePoint { t, x: x.clone(), mode });
            }
        }
        trace.patterns.push(pat);
        trace.endpoints.push(x.clone());
        if !ctl.problem.target.contains_point(&x) {
            return Err(ControllerError::OutsideDomain { t, x });
        }
    }
    Ok(trace)
}
