//! Model description language: expressions, model files and the compiled
//! vector fields.

mod expr;
mod parser;
mod system;
mod tape;

use thiserror::Error;

use crate::error::IntervalError;

pub use expr::{BinaryOp, Expr, Literal, UnaryOp, Var};
pub use parser::{parse_expr, parse_expr_at, Scope};
pub use system::{SwitchedSystem, P_MAX};
pub use tape::{Jet, Tape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: undeclared variable '{name}'")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("mode {mode}: expected {expected} right-hand sides, found {found}")]
    ArityMismatch { mode: usize, expected: usize, found: usize },
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Parses a model file.
pub fn parse_model(text: &str) -> Result<SwitchedSystem, ModelError> {
    parser::parse_model(text).map(|s| s.with_source(text))
}
