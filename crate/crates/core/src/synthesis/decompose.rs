//! Recursive bisection of the recurrence set and certificate checking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::{certify, search_in, Algorithm, Certificate, SearchContext};
use super::{Pattern, SynthesisError, SynthesisProblem};
use crate::ibox::IntervalBox;
use crate::model::SwitchedSystem;

/// A sub-box of R with the pattern that controls it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub region: IntervalBox,
    pub pattern: Pattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub cells: Vec<Cell>,
    pub problem: SynthesisProblem,
}

impl Decomposition {
    pub fn max_pattern_len(&self) -> usize {
        self.cells.iter().map(|c| c.pattern.len()).max().unwrap_or(0)
    }
}

fn child_id(parent: &str, i: usize) -> String {
    if i < 10 {
        format!("{parent}{i}")
    } else {
        format!("{parent}({i})")
    }
}

/// Covers `prob.r` with cells controlled by patterns found with `algo`,
/// splitting failing cells up to depth `prob.d`. Sibling cells are solved
/// in parallel on the current rayon pool; the result does not depend on
/// scheduling.
pub fn decomposition(
    sys: &SwitchedSystem,
    prob: &SynthesisProblem,
    algo: Algorithm,
    ctx: &SearchContext,
) -> Result<Decomposition, SynthesisError> {
    prob.validate()?;
    prob.check_system(sys)?;
    let cells = decompose_cell(sys, &prob.r, prob.d, "c", prob, algo, ctx)?;
    Ok(Decomposition {
        cells,
        problem: prob.clone(),
    })
}

fn decompose_cell(
    sys: &SwitchedSystem,
    w: &IntervalBox,
    depth: usize,
    id: &str,
    prob: &SynthesisProblem,
    algo: Algorithm,
    ctx: &SearchContext,
) -> Result<Vec<Cell>, SynthesisError> {
    if let Some(pattern) = search_in(algo, sys, w, prob, ctx, id)? {
        log::debug!("cell {id} {w}: pattern {pattern}");
        return Ok(vec![Cell {
            region: w.clone(),
            pattern,
        }]);
    }
    let failure = || SynthesisError::SynthesisFailure {
        cell: w.clone(),
        id: id.to_string(),
    };
    if depth == 0 {
        return Err(failure());
    }
    let children = prob.split.split(w).ok_or_else(failure)?;
    let results: Vec<_> = children
        .par_iter()
        .enumerate()
        .map(|(i, c)| decompose_cell(sys, c, depth - 1, &child_id(id, i), prob, algo, ctx))
        .collect();
    let mut cells = Vec::new();
    for r in results {
        cells.extend(r?);
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub region: IntervalBox,
    pub pattern: Pattern,
    /// Region inside R and pattern length within 1..=K with valid modes.
    pub well_formed: bool,
    pub in_target: bool,
    pub in_safe: bool,
    pub avoids_obstacle: bool,
    pub error: Option<String>,
}

impl CellReport {
    pub fn passed(&self) -> bool {
        self.well_formed && self.in_target && self.in_safe && self.avoids_obstacle && self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub cells: Vec<CellReport>,
    /// The union of the cells contains R.
    pub covers: bool,
    /// A point of R outside every cell, when `covers` is false.
    pub uncovered: Option<IntervalBox>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.covers && self.cells.iter().all(CellReport::passed)
    }

    pub fn failed_cells(&self) -> Vec<usize> {
        self.cells.iter().filter(|c| !c.passed()).map(|c| c.index).collect()
    }
}

/// Recomputes every tube from scratch and checks the cover of R.
pub fn verify_decomposition(sys: &SwitchedSystem, dec: &Decomposition) -> VerificationReport {
    let prob = &dec.problem;
    let cells = dec
        .cells
        .par_iter()
        .enumerate()
        .map(|(index, c)| verify_cell(sys, prob, index, c))
        .collect();
    let regions: Vec<&IntervalBox> = dec.cells.iter().map(|c| &c.region).collect();
    let uncovered = if regions.iter().any(|r| r.dim() != prob.r.dim()) {
        Some(prob.r.clone())
    } else {
        uncovered_part(&prob.r, &regions)
    };
    VerificationReport {
        cells,
        covers: uncovered.is_none(),
        uncovered,
    }
}

fn verify_cell(sys: &SwitchedSystem, prob: &SynthesisProblem, index: usize, c: &Cell) -> CellReport {
    let modes_ok = c.pattern.iter().all(|&m| (1..=sys.n_modes()).contains(&m));
    let well_formed = c.region.dim() == prob.dim()
        && sys.dim() == prob.dim()
        && c.region.subset_of(&prob.r).unwrap_or(false)
        && (1..=prob.k).contains(&c.pattern.len())
        && modes_ok;
    let mut report = CellReport {
        index,
        region: c.region.clone(),
        pattern: c.pattern.clone(),
        well_formed,
        in_target: false,
        in_safe: false,
        avoids_obstacle: false,
        error: None,
    };
    if c.region.dim() != sys.dim() || !modes_ok || c.pattern.is_empty() {
        report.error = Some("cell cannot be integrated".into());
        return report;
    }
    match certify(sys, &c.region, &c.pattern, prob) {
        Ok(Certificate {
            in_target,
            in_safe,
            avoids_obstacle,
        }) => {
            report.in_target = in_target;
            report.in_safe = in_safe;
            report.avoids_obstacle = avoids_obstacle;
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Overlap of `a` and `q` with positive length in every dimension where `q`
/// has positive width.
fn overlaps(a: &IntervalBox, q: &IntervalBox) -> bool {
    q.iter().zip(a.iter()).all(|(qi, ai)| {
        let lo = qi.lo().max(ai.lo());
        let hi = qi.hi().min(ai.hi());
        if qi.width() > 0.0 {
            lo < hi
        } else {
            lo <= hi
        }
    })
}

/// Some sub-box of `q` not contained in any region, or `None` when the
/// regions cover `q`. Splits `q` along region faces that cut its interior.
fn uncovered_part(q: &IntervalBox, regions: &[&IntervalBox]) -> Option<IntervalBox> {
    if regions.iter().any(|r| q.subset_of(r).unwrap_or(false)) {
        return None;
    }
    let hits: Vec<&IntervalBox> = regions.iter().copied().filter(|r| overlaps(r, q)).collect();
    let cut = hits.iter().find_map(|r| {
        (0..q.dim()).find_map(|k| {
            let (lo, hi) = (q[k].lo(), q[k].hi());
            [r[k].lo(), r[k].hi()]
                .into_iter()
                .find(|&c| lo < c && c < hi)
                .map(|c| (k, c))
        })
    });
    let Some((k, c)) = cut else {
        return Some(q.clone());
    };
    let mut left = q.clone().into_intervals();
    let mut right = left.clone();
    left[k] = crate::interval::Interval::new(q[k].lo(), c);
    right[k] = crate::interval::Interval::new(c, q[k].hi());
    uncovered_part(&IntervalBox::new(left), &hits).or_else(|| uncovered_part(&IntervalBox::new(right), &hits))
}
