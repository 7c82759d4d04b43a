//! Controller synthesis by bisection of the recurrence set and pattern
//! search on each cell.

mod decompose;
mod pattern;
mod problem;
mod search;

use thiserror::Error;

use crate::error::BoxError;
use crate::ibox::IntervalBox;

pub use decompose::{decomposition, verify_decomposition, Cell, CellReport, Decomposition, VerificationReport};
pub use pattern::Pattern;
pub use problem::{SplitStrategy, SynthesisProblem};
pub use search::{
    certify, find_pattern, find_pattern2, Algorithm, Certificate, DiagnosticsSink, EventKind, SearchContext,
    SearchEvent, SearchNode, SearchStats,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("no pattern controls cell {id} = {cell}")]
    SynthesisFailure { cell: IntervalBox, id: String },
    #[error("search timed out after {} expansions", stats.expansions)]
    Timeout { stats: SearchStats },
    #[error(transparent)]
    Box(#[from] BoxError),
}
