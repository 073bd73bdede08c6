//! Continuous-time runs: piecewise-constant trajectories, limits, significant
//! moments and the run conditions relating state changes to agent firings.

mod run;
mod semantics;
mod simulate;
mod timing;
mod trajectory;

use thiserror::Error;

use crate::rule::EvalError;
use crate::state::{Location, StateError};
use crate::value::{format_rational, Rational};

pub use run::Run;
pub use semantics::{
    significant_moments, validate_run, Clause, MomentKind, RunReport, SignificantMoment, Violation,
};
pub use simulate::{simulate, AgentTiming};
pub use timing::{agent_timing_report, TimingReport, TimingWitness, WitnessKind};
pub use trajectory::{Breakpoint, Piece, Side, Span, Trajectory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimelineError {
    #[error("moment {} is outside [0, {}]", format_rational(.time), format_rational(.horizon))]
    OutOfHorizon { time: Rational, horizon: Rational },
    #[error("malformed trajectory: {0}")]
    Malformed(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("no trajectory or static value for {0}")]
    UnknownLocation(Location),
    #[error("inconsistent update set at {}", format_rational(.0))]
    Inconsistent(Rational),
    #[error("simulation did not reach the horizon after {0} steps")]
    TooManySteps(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<StateError> for TimelineError {
    fn from(e: StateError) -> Self {
        TimelineError::Eval(e.into())
    }
}
