//! Pattern search for a single cell.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Pattern, SynthesisError, SynthesisProblem};
use crate::ibox::IntervalBox;
use crate::integrator::{integrate_mode_from, tube, IntegrationError, Segment};
use crate::model::SwitchedSystem;

/// Pattern-search function used by the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Exhaustive enumeration, one full tube per candidate.
    #[serde(rename = "fp")]
    Naive,
    /// Breadth-first search with prefix reuse and branch cutting.
    #[default]
    #[serde(rename = "fp2")]
    Pruned,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Naive => "fp",
            Algorithm::Pruned => "fp2",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fp" => Ok(Algorithm::Naive),
            "fp2" => Ok(Algorithm::Pruned),
            _ => Err(format!("unknown algorithm '{s}' (expected fp or fp2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Expand,
    Cut,
    Validate,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Expand => "EXPAND",
            EventKind::Cut => "CUT",
            EventKind::Validate => "VALIDATE",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchEvent<'a> {
    pub kind: EventKind,
    pub pattern: &'a Pattern,
    pub cell: &'a str,
}

/// `EXPAND,1-2,c01`
impl fmt::Display for SearchEvent<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.kind, self.pattern, self.cell)
    }
}

pub type DiagnosticsSink = Arc<dyn Fn(&SearchEvent<'_>) + Send + Sync>;

#[derive(Debug, Default)]
struct Counters {
    expansions: AtomicU64,
    cuts: AtomicU64,
    validations: AtomicU64,
    integrations: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Candidate patterns whose tube was computed.
    pub expansions: u64,
    pub cuts: u64,
    pub validations: u64,
    /// Single-mode validated integrations over one period.
    pub integrations: u64,
}

/// Shared counters, deadline and diagnostics for a synthesis run.
#[derive(Clone, Default)]
pub struct SearchContext {
    counters: Arc<Counters>,
    expired: Arc<AtomicBool>,
    deadline: Option<Instant>,
    sink: Option<DiagnosticsSink>,
}

impl fmt::Debug for SearchContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SearchContext")
            .field("stats", &self.stats())
            .field("deadline", &self.deadline)
            .field("diagnostics", &self.sink.is_some())
            .finish()
    }
}

impl SearchContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub fn with_diagnostics(mut self, sink: DiagnosticsSink) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn stats(&self) -> SearchStats {
        let c = &self.counters;
        SearchStats {
            expansions: c.expansions.load(Ordering::Relaxed),
            cuts: c.cuts.load(Ordering::Relaxed),
            validations: c.validations.load(Ordering::Relaxed),
            integrations: c.integrations.load(Ordering::Relaxed),
        }
    }

    fn check_deadline(&self) -> Result<(), SynthesisError> {
        if self.expired.load(Ordering::Relaxed) {
            return Err(SynthesisError::Timeout { stats: self.stats() });
        }
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                self.expired.store(true, Ordering::Relaxed);
                return Err(SynthesisError::Timeout { stats: self.stats() });
            }
        }
        Ok(())
    }

    fn event(&self, kind: EventKind, pattern: &Pattern, cell: &str) {
        let counter = match kind {
            EventKind::Expand => &self.counters.expansions,
            EventKind::Cut => &self.counters.cuts,
            EventKind::Validate => &self.counters.validations,
        };
        counter.fetch_add(1, Ordering::Relaxed);
        if let Some(sink) = &self.sink {
            sink(&SearchEvent { kind, pattern, cell });
        }
    }

    fn integrated(&self, n: usize) {
        self.counters.integrations.fetch_add(n as u64, Ordering::Relaxed);
    }
}

/// Frontier entry: the cell, the image of the cell under `pat`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub y_init: IntervalBox,
    pub y_current: IntervalBox,
    pub pat: Pattern,
}

/// Outcome of the three checks on one cell and pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Certificate {
    pub in_target: bool,
    pub in_safe: bool,
    pub avoids_obstacle: bool,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.in_target && self.in_safe && self.avoids_obstacle
    }
}

/// Every segment inside S and disjoint from B.
pub(crate) fn segments_safe(segments: &[Segment], prob: &SynthesisProblem) -> (bool, bool) {
    let in_safe = segments.iter().all(|s| s.enclosure.subset_of(&prob.s).unwrap_or(false));
    let avoids = match &prob.b {
        None => true,
        Some(b) => segments.iter().all(|s| !s.enclosure.intersects(b).unwrap_or(true)),
    };
    (in_safe, avoids)
}

/// Recomputes the tube of `pat` from `w` and evaluates the three checks.
pub fn certify(
    sys: &SwitchedSystem,
    w: &IntervalBox,
    pat: &[usize],
    prob: &SynthesisProblem,
) -> Result<Certificate, IntegrationError> {
    let t = tube(sys, w, pat, &prob.integrator)?;
    let (in_safe, avoids_obstacle) = segments_safe(&t.segments, prob);
    Ok(Certificate {
        in_target: t.endpoint.subset_of(&prob.target).unwrap_or(false),
        in_safe,
        avoids_obstacle,
    })
}

fn check_cell(sys: &SwitchedSystem, w: &IntervalBox, prob: &SynthesisProblem) -> Result<(), SynthesisError> {
    prob.check_system(sys)?;
    if w.dim() != prob.dim() {
        return Err(SynthesisError::InvalidProblem(format!(
            "cell has dimension {}, problem has {}",
            w.dim(),
            prob.dim()
        )));
    }
    Ok(())
}

/// Next pattern of the same length in lexicographic order, if any.
fn next_pattern(p: &mut [usize], n_modes: usize) -> bool {
    for i in (0..p.len()).rev() {
        if p[i] < n_modes {
            p[i] += 1;
            p[i + 1..].iter_mut().for_each(|m| *m = 1);
            return true;
        }
    }
    false
}

/// Exhaustive search: the first pattern by (length, lexicographic order)
/// that passes all three checks.
pub fn find_pattern(
    sys: &SwitchedSystem,
    w: &IntervalBox,
    prob: &SynthesisProblem,
    ctx: &SearchContext,
) -> Result<Option<Pattern>, SynthesisError> {
    check_cell(sys, w, prob)?;
    find_pattern_in(sys, w, prob, ctx, "c")
}

pub(crate) fn find_pattern_in(
    sys: &SwitchedSystem,
    w: &IntervalBox,
    prob: &SynthesisProblem,
    ctx: &SearchContext,
    cell: &str,
) -> Result<Option<Pattern>, SynthesisError> {
    let n_modes = sys.n_modes();
    for len in 1..=prob.k {
        let mut modes = vec![1; len];
        loop {
            ctx.check_deadline()?;
            let pat = Pattern(modes.clone());
            ctx.event(EventKind::Expand, &pat, cell);
            let ok = match tube(sys, w, &pat, &prob.integrator) {
                Ok(t) => {
                    ctx.integrated(len);
                    let (in_safe, avoids) = segments_safe(&t.segments, prob);
                    in_safe && avoids && t.endpoint.subset_of(&prob.target)?
                }
                Err(e) => {
                    log::debug!("cell {cell}: pattern {pat} rejected: {e}");
                    false
                }
            };
            if ok {
                ctx.event(EventKind::Validate, &pat, cell);
                return Ok(Some(pat));
            }
            if !next_pattern(&mut modes, n_modes) {
                break;
            }
        }
    }
    Ok(None)
}

/// Breadth-first search over patterns. A branch is cut as soon as its last
/// period leaves S or meets B; the images of surviving prefixes are reused.
pub fn find_pattern2(
    sys: &SwitchedSystem,
    w: &IntervalBox,
    prob: &SynthesisProblem,
    ctx: &SearchContext,
) -> Result<Option<Pattern>, SynthesisError> {
    check_cell(sys, w, prob)?;
    find_pattern2_in(sys, w, prob, ctx, "c")
}

pub(crate) fn find_pattern2_in(
    sys: &SwitchedSystem,
    w: &IntervalBox,
    prob: &SynthesisProblem,
    ctx: &SearchContext,
    cell: &str,
) -> Result<Option<Pattern>, SynthesisError> {
    let tau = sys.tau();
    let mut frontier = VecDeque::from([SearchNode {
        y_init: w.clone(),
        y_current: w.clone(),
        pat: Pattern::empty(),
    }]);
    while let Some(node) = frontier.pop_front() {
        let offset = node.pat.len() as f64 * tau;
        for mode in 1..=sys.n_modes() {
            ctx.check_deadline()?;
            let pat = node.pat.extended(mode);
            ctx.event(EventKind::Expand, &pat, cell);
            let step = match integrate_mode_from(sys, mode, &node.y_current, tau, offset, &prob.integrator) {
                Ok(t) => t,
                Err(e) => {
                    log::debug!("cell {cell}: pattern {pat} cut: {e}");
                    ctx.event(EventKind::Cut, &pat, cell);
                    continue;
                }
            };
            ctx.integrated(1);
            let (in_safe, avoids) = segments_safe(&step.segments, prob);
            if !(in_safe && avoids) {
                ctx.event(EventKind::Cut, &pat, cell);
                continue;
            }
            if step.endpoint.subset_of(&prob.target)? {
                ctx.event(EventKind::Validate, &pat, cell);
                return Ok(Some(pat));
            }
            if pat.len() < prob.k {
                frontier.push_back(SearchNode {
                    y_init: node.y_init.clone(),
                    y_current: step.endpoint,
                    pat,
                });
            }
        }
    }
    Ok(None)
}

pub(crate) fn search_in(
    algo: Algorithm,
    sys: &SwitchedSystem,
    w: &IntervalBox,
    prob: &SynthesisProblem,
    ctx: &SearchContext,
    cell: &str,
) -> Result<Option<Pattern>, SynthesisError> {
    match algo {
        Algorithm::Naive => find_pattern_in(sys, w, prob, ctx, cell),
        Algorithm::Pruned => find_pattern2_in(sys, w, prob, ctx, cell),
    }
}
