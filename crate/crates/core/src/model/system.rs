use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::IntervalError;
use crate::ibox::IntervalBox;
use crate::interval::Interval;
use crate::model::expr::{Expr, Var};
use crate::model::tape::Tape;
use crate::model::ModelError;
use crate::scalar::Scalar;

/// Highest time-derivative order `lie_derivative` accepts.
pub const P_MAX: usize = 8;

/// A switched system `x' = f_σ(x, d)` with modes numbered from 1.
#[derive(Debug, Clone)]
pub struct SwitchedSystem {
    name: String,
    n: usize,
    tau: f64,
    dist: IntervalBox<f64>,
    constants: BTreeMap<String, Expr>,
    modes: Vec<Vec<Expr>>,
    tapes: Arc<Vec<Tape>>,
    source: Option<String>,
}

impl SwitchedSystem {
    pub fn new(
        name: impl Into<String>,
        n: usize,
        tau: f64,
        dist: Option<IntervalBox<f64>>,
        constants: BTreeMap<String, Expr>,
        modes: Vec<Vec<Expr>>,
    ) -> Result<Self, ModelError> {
        if n == 0 {
            return Err(ModelError::Invalid("state dimension must be at least 1".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(ModelError::Invalid(format!("tau must be positive, got {tau}")));
        }
        if modes.is_empty() {
            return Err(ModelError::Invalid("at least one mode is required".into()));
        }
        let dist = dist.unwrap_or_else(|| IntervalBox::new(Vec::new()));
        if dist.is_empty() && dist.dim() > 0 {
            return Err(ModelError::Invalid("disturbance box is empty".into()));
        }
        let m = dist.dim();
        for (k, rhs) in modes.iter().enumerate() {
            if rhs.len() != n {
                return Err(ModelError::ArityMismatch {
                    mode: k + 1,
                    expected: n,
                    found: rhs.len(),
                });
            }
            let mut bad = None;
            for e in rhs {
                e.for_each_var(&mut |v| match v {
                    Var::State(i) if i >= n => bad = Some(v),
                    Var::Dist(j) if j >= m => bad = Some(v),
                    _ => {}
                });
            }
            if let Some(v) = bad {
                return Err(ModelError::Invalid(format!(
                    "mode {} uses undeclared variable {v}",
                    k + 1
                )));
            }
        }
        let tapes = modes.iter().map(|rhs| Tape::compile(rhs, n, m)).collect();
        Ok(Self {
            name: name.into(),
            n,
            tau,
            dist,
            constants,
            modes,
            tapes: Arc::new(tapes),
            source: None,
        })
    }

    pub(crate) fn with_source(mut self, text: &str) -> Self {
        self.source = Some(text.to_string());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension n.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_dists(&self) -> usize {
        self.dist.dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dist_box(&self) -> &IntervalBox<f64> {
        &self.dist
    }

    pub fn constants(&self) -> &BTreeMap<String, Expr> {
        &self.constants
    }

    /// Text the system was parsed from, if any.
    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    /// Right-hand side of mode `mode` (1-based).
    pub fn rhs(&self, mode: usize) -> &[Expr] {
        &self.modes[mode - 1]
    }

    pub fn tape(&self, mode: usize) -> &Tape {
        &self.tapes[mode - 1]
    }

    pub fn check_mode(&self, mode: usize) -> Result<(), ModelError> {
        if mode == 0 || mode > self.modes.len() {
            return Err(ModelError::Invalid(format!(
                "mode {mode} out of range 1..={}",
                self.modes.len()
            )));
        }
        Ok(())
    }

    pub fn eval_interval<T: Scalar>(
        &self,
        mode: usize,
        x: &[Interval<T>],
        d: &[Interval<T>],
    ) -> Result<Vec<Interval<T>>, IntervalError> {
        self.tape(mode).eval(x, d)
    }

    /// Enclosure of the `p`-th time derivative of `f_mode` along solutions,
    /// with `d` held constant.
    pub fn lie_derivative<T: Scalar>(
        &self,
        mode: usize,
        p: usize,
        x: &[Interval<T>],
        d: &[Interval<T>],
    ) -> Result<Vec<Interval<T>>, ModelError> {
        if p > P_MAX {
            return Err(ModelError::UnsupportedOrder { order: p, max: P_MAX });
        }
        self.check_mode(mode)?;
        let tape = self.tape(mode);
        // f[p] is coefficient p of f along the solution; f^(p) = p! f[p]
        let coeffs = tape.ode_series(x, d, p + 1)?;
        let mut fact = Interval::<T>::one();
        for k in 2..=p {
            fact = fact * Interval::from_usize(k);
        }
        let scale = fact * Interval::from_usize(p + 1);
        Ok(coeffs[p + 1].iter().map(|c| *c * scale).collect())
    }
}
