//! Validated integration of a single mode and of switching patterns.

mod reference;
mod scheme;
mod step;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::IntervalError;
use crate::ibox::IntervalBox;
use crate::interval::Interval;
use crate::model::{ModelError, SwitchedSystem};
use crate::scalar::Scalar;

pub use reference::{reference_step, ReferenceIntegrator};
pub use scheme::ButcherScheme;
pub use step::{picard_enclosure, validated_step, StepResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("no a priori enclosure certified for step {h}")]
    EnclosureFailure { h: f64 },
    #[error("truncation error width {width:e} exceeds tolerance at step {h}")]
    StepTooWide { h: f64, width: f64 },
    #[error("integration failed at t = {t} (step {h}): {cause}")]
    IntegrationFailure {
        t: f64,
        h: f64,
        cause: Box<IntegrationError>,
    },
    #[error("expected a box of dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: ButcherScheme,
    /// Maximum width of the truncation error term, per dimension.
    pub lte_tol: f64,
    /// The smallest step is `duration / 2^min_step_exponent`.
    pub min_step_exponent: u32,
    pub max_inflations: usize,
    pub inflation_factor: f64,
    pub inflation_padding: f64,
    pub seed_fraction: f64,
    pub seed_padding: f64,
    /// Extra Picard iterations applied to a certified enclosure.
    pub refinements: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: ButcherScheme::Rk4,
            lte_tol: 1e-6,
            min_step_exponent: 10,
            max_inflations: 8,
            inflation_factor: 1.1,
            inflation_padding: 1e-10,
            seed_fraction: 0.1,
            seed_padding: 1e-10,
            refinements: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T: Scalar = f64> {
    /// Time span covered, measured from the start of the pattern.
    pub t_lo: f64,
    pub t_hi: f64,
    /// Mode active on the span (1-based; 0 for the degenerate segment of
    /// an empty pattern).
    pub mode: usize,
    pub enclosure: IntervalBox<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeResult<T: Scalar = f64> {
    pub segments: Vec<Segment<T>>,
    pub endpoint: IntervalBox<T>,
}

impl<T: Scalar> TubeResult<T> {
    /// `t_lo,t_hi,dim0_lo,dim0_hi,...`, one row per segment.
    pub fn to_csv(&self) -> String {
        let n = self.endpoint.dim();
        let mut out = String::from("t_lo,t_hi");
        for i in 0..n {
            let _ = write!(out, ",dim{i}_lo,dim{i}_hi");
        }
        out.push('\n');
        for s in &self.segments {
            let _ = write!(out, "{:?},{:?}", s.t_lo, s.t_hi);
            for iv in s.enclosure.iter() {
                let _ = write!(out, ",{},{}", iv.lo(), iv.hi());
            }
            out.push('\n');
        }
        out
    }

    /// Hull of every segment.
    pub fn hull(&self) -> IntervalBox<T> {
        let mut it = self.segments.iter().map(|s| s.enclosure.clone());
        let first = it.next().unwrap_or_else(|| self.endpoint.clone());
        it.fold(first, |acc, b| acc.hull(&b).expect("segments share a dimension"))
    }
}

fn step_interval<T: Scalar>(t: f64, t_next: f64) -> Interval<T> {
    let lo = f64::sub_down(t_next, t);
    let hi = f64::sub_up(t_next, t);
    Interval::new(T::from_f64_down(lo), T::from_f64_up(hi))
}

/// Integrates `mode` from `x0` over `[0, duration]` with adaptive steps.
/// Segment times are offset by `t_offset`.
pub fn integrate_mode_from<T: Scalar>(
    sys: &SwitchedSystem,
    mode: usize,
    x0: &IntervalBox<T>,
    duration: f64,
    t_offset: f64,
    cfg: &IntegratorConfig,
) -> Result<TubeResult<T>, IntegrationError> {
    sys.check_mode(mode)?;
    if x0.dim() != sys.dim() {
        return Err(IntegrationError::DimensionMismatch {
            expected: sys.dim(),
            found: x0.dim(),
        });
    }
    assert!(duration > 0.0, "duration must be positive");
    let h_min = duration / 2f64.powi(cfg.min_step_exponent as i32);
    let mut h = duration;
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut segments = Vec::new();
    let quarter_tol = cfg.lte_tol / 4.0;
    while t < duration {
        let t_next = if t + h >= duration { duration } else { t + h };
        match validated_step(sys, mode, &x, step_interval::<T>(t, t_next), cfg) {
            Ok(r) => {
                segments.push(Segment {
                    t_lo: t_offset + t,
                    t_hi: t_offset + t_next,
                    mode,
                    enclosure: r.enclosure,
                });
                let small = r
                    .lte
                    .iter()
                    .all(|e| e.width().to_f64().unwrap_or(f64::INFINITY) < quarter_tol);
                x = r.x_next;
                t = t_next;
                if small && h < duration {
                    h *= 2.0;
                }
            }
            Err(
                e @ (IntegrationError::EnclosureFailure { .. }
                | IntegrationError::StepTooWide { .. }
                | IntegrationError::Interval(_)),
            ) => {
                if h <= h_min {
                    return Err(IntegrationError::IntegrationFailure {
                        t: t_offset + t,
                        h,
                        cause: Box::new(e),
                    });
                }
                h /= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TubeResult { segments, endpoint: x })
}

pub fn integrate_mode<T: Scalar>(
    sys: &SwitchedSystem,
    mode: usize,
    x0: &IntervalBox<T>,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<TubeResult<T>, IntegrationError> {
    integrate_mode_from(sys, mode, x0, duration, 0.0, cfg)
}

/// All segments of the pattern applied from `x`, each mode for one period.
pub fn tube<T: Scalar>(
    sys: &SwitchedSystem,
    x: &IntervalBox<T>,
    pattern: &[usize],
    cfg: &IntegratorConfig,
) -> Result<TubeResult<T>, IntegrationError> {
    if pattern.is_empty() {
        return Ok(TubeResult {
            segments: vec![Segment {
                t_lo: 0.0,
                t_hi: 0.0,
                mode: 0,
                enclosure: x.clone(),
            }],
            endpoint: x.clone(),
        });
    }
    let tau = sys.tau();
    let mut segments = Vec::new();
    let mut cur = x.clone();
    for (j, &mode) in pattern.iter().enumerate() {
        let r = integrate_mode_from(sys, mode, &cur, tau, j as f64 * tau, cfg)?;
        segments.extend(r.segments);
        cur = r.endpoint;
    }
    Ok(TubeResult {
        segments,
        endpoint: cur,
    })
}

/// Successor set of `x` under the pattern.
pub fn post<T: Scalar>(
    sys: &SwitchedSystem,
    x: &IntervalBox<T>,
    pattern: &[usize],
    cfg: &IntegratorConfig,
) -> Result<IntervalBox<T>, IntegrationError> {
    let mut cur = x.clone();
    for &mode in pattern {
        cur = integrate_mode(sys, mode, &cur, sys.tau(), cfg)?.endpoint;
    }
    Ok(cur)
}
