//! Guaranteed control synthesis for sampled switched nonlinear systems.

pub mod controller;
pub mod error;
pub mod ibox;
pub mod integrator;
pub mod interval;
pub mod model;
pub mod scalar;
pub mod synthesis;

pub use controller::{simulate_closed_loop, Controller, ControllerError, Trace};
pub use error::{BoxError, IntervalError};
pub use ibox::{IntervalBox, SetRelation};
pub use integrator::{ButcherScheme, IntegrationError, IntegratorConfig, StepResult, TubeResult};
pub use interval::{interval_arith, ArithOp, Interval};
pub use model::{parse_model, Expr, ModelError, SwitchedSystem};
pub use scalar::Scalar;
pub use synthesis::{
    decomposition, find_pattern, find_pattern2, verify_decomposition, Algorithm, Decomposition, Pattern, SearchContext,
    SplitStrategy, SynthesisError, SynthesisProblem,
};

pub type IntervalF64 = Interval<f64>;
pub type IntervalF32 = Interval<f32>;
pub type BoxF64 = IntervalBox<f64>;
pub type BoxF32 = IntervalBox<f32>;
