use std::collections::BTreeMap;

use crate::rule::{
    critical_times, enabled, eval_guard, eval_term, Environment, Guard, Program, Rule, Term,
};
use crate::state::{Location, State, CURRENT_TIME};
use crate::value::{Rational, Value};

use super::{Side, TimelineError, Trajectory};

/// A run over a finite horizon.
///
/// `base` carries the vocabulary, universes and static interpretation; every
/// dynamic location that may change has a trajectory. `CT` has no trajectory:
/// it always reads as the current moment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    program: Program,
    base: State,
    trajectories: BTreeMap<Location, Trajectory>,
    horizon: Rational,
    marks: Vec<Rational>,
}

impl Run {
    pub fn new(
        program: Program,
        base: State,
        trajectories: BTreeMap<Location, Trajectory>,
        horizon: Rational,
    ) -> Self {
        Run {
            program,
            base,
            trajectories,
            horizon,
            marks: Vec::new(),
        }
    }

    /// Moments the gate construction marked as forced `OpenGate` firings.
    pub fn with_marks(mut self, marks: Vec<Rational>) -> Self {
        self.marks = marks;
        self
    }

    pub fn marks(&self) -> &[Rational] {
        &self.marks
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn base(&self) -> &State {
        &self.base
    }

    pub fn horizon(&self) -> &Rational {
        &self.horizon
    }

    pub fn trajectories(&self) -> &BTreeMap<Location, Trajectory> {
        &self.trajectories
    }

    pub fn trajectory(&self, loc: &Location) -> Option<&Trajectory> {
        self.trajectories.get(loc)
    }

    pub fn trajectory_mut(&mut self, loc: &Location) -> Option<&mut Trajectory> {
        self.trajectories.get_mut(loc)
    }

    pub fn insert_trajectory(&mut self, loc: Location, t: Trajectory) {
        self.trajectories.insert(loc, t);
    }

    pub fn remove_trajectory(&mut self, loc: &Location) -> Option<Trajectory> {
        self.trajectories.remove(loc)
    }

    fn check_time(&self, t: &Rational, side: Side) -> Result<(), TimelineError> {
        let zero = Rational::from_integer(0.into());
        if *t < zero || *t > self.horizon || (side == Side::Minus && *t == zero) {
            return Err(TimelineError::OutOfHorizon {
                time: t.clone(),
                horizon: self.horizon.clone(),
            });
        }
        Ok(())
    }

    pub fn value_at(
        &self,
        loc: &Location,
        t: &Rational,
        side: Side,
    ) -> Result<Value, TimelineError> {
        self.check_time(t, side)?;
        if loc.symbol == CURRENT_TIME && loc.args.is_empty() {
            return Ok(Value::number(t.clone()));
        }
        match self.trajectories.get(loc) {
            Some(traj) => Ok(traj.value_unchecked(t, side)),
            None => Ok(self.base.read(loc)?),
        }
    }

    /// The state at `t` (or its one-sided limit), with `CT` = `t`.
    pub fn state_at(&self, t: &Rational, side: Side) -> Result<State, TimelineError> {
        self.check_time(t, side)?;
        Ok(self.state_unchecked(t, side))
    }

    pub(crate) fn state_unchecked(&self, t: &Rational, side: Side) -> State {
        let mut s = self.base.at_time(t);
        for (loc, traj) in &self.trajectories {
            if loc.symbol == CURRENT_TIME {
                continue;
            }
            // Trajectory values were checked against the vocabulary when the
            // run was validated; unknown symbols are simply skipped here.
            let _ = s.assign(loc.clone(), traj.value_unchecked(t, side));
        }
        s
    }

    /// Union of all trajectory breakpoints, always including 0.
    pub fn breakpoints(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self
            .trajectories
            .values()
            .flat_map(|t| t.breakpoints().iter().map(|b| b.time.clone()))
            .collect();
        out.push(Rational::from_integer(0.into()));
        out.sort();
        out.dedup();
        out
    }

    /// Breakpoints plus every moment at which a `CT` comparison inside
    /// `rule` can flip. Between consecutive candidates `rule`'s update set
    /// is constant.
    pub fn candidate_moments(
        &self,
        rule: &Rule,
        env: &Environment,
    ) -> Result<Vec<Rational>, TimelineError> {
        let bps = self.breakpoints();
        let mut out = bps.clone();
        for (i, lo) in bps.iter().enumerate() {
            let hi = bps.get(i + 1).unwrap_or(&self.horizon);
            if lo >= hi {
                continue;
            }
            let s = self.state_unchecked(&crate::value::midpoint(lo, hi), Side::At);
            out.extend(
                critical_times(&s, env, rule)?
                    .into_iter()
                    .filter(|r| r > lo && r < hi),
            );
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// The truth value of `guard` over time.
    pub fn guard_signal(
        &self,
        guard: &Guard,
        env: &Environment,
    ) -> Result<Trajectory, TimelineError> {
        let probe = Rule::when(guard.clone(), Rule::Block(Vec::new()));
        let moments = self.candidate_moments(&probe, env)?;
        Trajectory::sample(self.horizon.clone(), &moments, |t| {
            let s = self.state_unchecked(t, Side::At);
            Ok(Value::Bool(eval_guard(&s, env, guard)?))
        })
    }

    /// When `agent` is enabled, over time.
    pub fn enabled_signal(&self, agent: &str) -> Result<Trajectory, TimelineError> {
        let rule = self
            .program
            .module(agent)
            .ok_or_else(|| TimelineError::UnknownAgent(agent.to_string()))?;
        let moments = self.candidate_moments(rule, &Environment::new())?;
        Trajectory::sample(self.horizon.clone(), &moments, |t| {
            let s = self.state_unchecked(t, Side::At);
            Ok(Value::Bool(enabled(&s, rule)?))
        })
    }

    /// Value of `term` in the state at `t` on the given side. `CT` reads as
    /// `t` on every side.
    pub fn term_value(
        &self,
        term: &Term,
        env: &Environment,
        t: &Rational,
        side: Side,
    ) -> Result<Value, TimelineError> {
        let s = self.state_at(t, side)?;
        Ok(eval_term(&s, env, term)?)
    }
}
