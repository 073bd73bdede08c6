//! Verdicts for the safety, liveness and auxiliary properties of crossing
//! runs. Interval properties are decided on trajectory segments, never by
//! sampling.

mod lemmas;
mod tightness;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::crossing::{
    self, gate_status, pattern_of, validate_pattern, CrossingError, Params, TrainPattern, CLOSE,
    CLOSED, CONTROLLER, GATE, OPEN, OPENED,
};
use crate::rule::{Environment, EvalError, Guard};
use crate::state::Location;
use crate::timeline::{
    agent_timing_report, validate_run, Breakpoint, Run, Side, Span, TimelineError, Trajectory,
};
use crate::value::{format_rational, int, Rational, Value};

pub use lemmas::check_lemmas;
pub use tightness::{tightness_witness, TightnessError, TightnessWitness};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("run cannot be checked: {0}")]
    InvalidRun(String),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<CrossingError> for CheckError {
    fn from(e: CrossingError) -> Self {
        CheckError::InvalidRun(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Fail,
    /// The property's hypothesis does not hold for this run.
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        })
    }
}

/// Where a property fails, what it demanded there and what the run has.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub span: Span,
    pub expected: String,
    pub observed: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "over {}: expected {}, observed {}",
            self.span, self.expected, self.observed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub property: String,
    pub status: Status,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(property: impl Into<String>) -> Self {
        Verdict {
            property: property.into(),
            status: Status::Pass,
            witnesses: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn skipped(property: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut v = Verdict::new(property);
        v.status = Status::Skipped;
        v.notes.push(reason.into());
        v
    }

    pub fn fail(&mut self, w: Witness) {
        self.status = Status::Fail;
        self.witnesses.push(w);
    }

    pub fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }

    /// Start of the first witness, if any.
    pub fn first_moment(&self) -> Option<&Rational> {
        self.witnesses.first().map(|w| &w.span.start)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.property, self.status)?;
        for w in &self.witnesses {
            write!(f, "\n  {w}")?;
        }
        for n in &self.notes {
            write!(f, "\n  note: {n}")?;
        }
        Ok(())
    }
}

/// What the checks need from a run, extracted once.
pub(crate) struct Ctx<'a> {
    pub run: &'a Run,
    pub params: Params,
    pub pattern: TrainPattern,
    signals: RefCell<HashMap<String, Trajectory>>,
}

impl<'a> Ctx<'a> {
    pub fn new(run: &'a Run) -> Result<Self, CheckError> {
        let params = Params::from_state(run.base())?;
        let pattern = pattern_of(run)?;
        Ok(Ctx {
            run,
            params,
            pattern,
            signals: RefCell::default(),
        })
    }

    pub fn horizon(&self) -> &Rational {
        self.run.horizon()
    }

    pub fn tracks(&self) -> usize {
        self.pattern.track_count()
    }

    pub fn traj(&self, loc: &Location) -> Trajectory {
        trajectory_of(self.run, loc)
    }

    pub fn track_env(&self, i: usize) -> Environment {
        Environment::from([("x".to_string(), crossing::track(i))])
    }

    /// Guard signals are memoized; several lemmas share them.
    pub fn signal(&self, guard: &Guard, env: &Environment) -> Result<Trajectory, CheckError> {
        let key = format!("{guard:?} {env:?}");
        if let Some(t) = self.signals.borrow().get(&key) {
            return Ok(t.clone());
        }
        let t = self.run.guard_signal(guard, env)?;
        self.signals.borrow_mut().insert(key, t.clone());
        Ok(t)
    }
}

/// The trajectory of `loc`, or a constant one from the base state.
pub fn trajectory_of(run: &Run, loc: &Location) -> Trajectory {
    run.trajectory(loc).cloned().unwrap_or_else(|| {
        Trajectory::constant(
            run.horizon().clone(),
            run.base().read(loc).unwrap_or(Value::Undef),
        )
    })
}

/// Maximal spans over which a boolean trajectory is true.
pub fn positive_spans(t: &Trajectory) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    let mut open: Option<Span> = None;
    for piece in t.pieces() {
        if piece.value == Value::Bool(true) {
            open = Some(match open.take() {
                None => piece.span,
                Some(s) => Span::new(
                    s.start,
                    piece.span.end,
                    s.start_closed,
                    piece.span.end_closed,
                ),
            });
        } else if let Some(s) = open.take() {
            out.push(s);
        }
    }
    out.extend(open);
    out
}

/// A boolean trajectory that is true exactly at `points`.
pub fn points_signal(horizon: &Rational, points: &[Rational]) -> Trajectory {
    let f = Value::Bool(false);
    let t = Value::Bool(true);
    let mut bps = vec![Breakpoint::new(int(0), f.clone(), f.clone())];
    for p in points {
        if *p == int(0) {
            bps[0].at = t.clone();
        } else {
            bps.push(Breakpoint::new(p.clone(), t.clone(), f.clone()));
        }
    }
    Trajectory::from_breakpoints(horizon.clone(), bps).expect("points are sorted")
}

/// First stretch on which `actual` and `expected` differ.
pub fn first_difference(actual: &Trajectory, expected: &Trajectory) -> Option<Witness> {
    let same = actual.zip_with(expected, |a, b| Value::Bool(a == b));
    same.pieces()
        .into_iter()
        .find(|p| p.value == Value::Bool(false))
        .map(|p| {
            let t = p.span.sample();
            Witness {
                expected: expected
                    .value_at(&t, Side::At)
                    .unwrap_or(Value::Undef)
                    .to_string(),
                observed: actual
                    .value_at(&t, Side::At)
                    .unwrap_or(Value::Undef)
                    .to_string(),
                span: p.span,
            }
        })
}

/// First stretch of `span` where `t` is not `want`.
pub fn require(t: &Trajectory, span: &Span, want: &Value) -> Option<Witness> {
    t.first_violation(span, |v| v == want).map(|p| Witness {
        span: p.span,
        expected: want.to_string(),
        observed: p.value.to_string(),
    })
}

fn fr(r: &Rational) -> String {
    format_rational(r)
}

/// The gate is closed whenever a train is in the crossing, and already
/// from `t1 + dmin` until the train has left.
pub fn check_safety(run: &Run) -> Result<Verdict, CheckError> {
    let ctx = Ctx::new(run)?;
    let gs = ctx.traj(&gate_status());
    let closed = Value::atom(CLOSED);
    let mut v = Verdict::new("safety");
    for (i, trains) in ctx.pattern.tracks.iter().enumerate() {
        for tr in trains {
            let crossing = Span::closed_open(tr.enter.clone(), tr.exit.clone());
            if let Some(w) = require(&gs, &crossing, &closed) {
                v.fail(w);
                continue;
            }
            let early = Span::closed(&tr.detect + &ctx.params.dmin, tr.exit.clone());
            if let Some(mut w) = require(&gs, &early, &closed) {
                w.expected = format!(
                    "{} from t1 + dmin = {} on {}",
                    w.expected,
                    fr(&early.start),
                    crossing::track_name(i)
                );
                v.fail(w);
            }
        }
    }
    Ok(v)
}

/// A maximal open interval during which no train is in the crossing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyInterval {
    pub start: Rational,
    pub end: Rational,
    /// The interval runs past the horizon; `end` is the horizon.
    pub truncated: bool,
}

pub fn empty_intervals(pattern: &TrainPattern, horizon: &Rational) -> Vec<EmptyInterval> {
    let mut busy: Vec<(Rational, Rational)> = pattern
        .tracks
        .iter()
        .flatten()
        .map(|t| (t.enter.clone(), t.exit.clone()))
        .collect();
    busy.sort();
    let mut merged: Vec<(Rational, Rational)> = Vec::new();
    for (a, b) in busy {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.clone().max(b),
            _ => merged.push((a, b)),
        }
    }
    let mut out = Vec::new();
    let mut start = int(0);
    for (a, b) in merged {
        if a > start {
            out.push(EmptyInterval {
                start: start.clone(),
                end: a,
                truncated: false,
            });
        }
        start = b;
    }
    if start < *horizon {
        out.push(EmptyInterval {
            start,
            end: horizon.clone(),
            truncated: true,
        });
    }
    out
}

/// Over every empty interval `(α, β)` with `α + dopen < β − Dclose`, the
/// gate is opened throughout `[α + dopen, β − Dclose]`.
pub fn check_liveness(run: &Run) -> Result<Verdict, CheckError> {
    let p = Params::from_state(run.base())?;
    check_liveness_with(run, &p.dopen, &p.big_dclose())
}

/// Liveness with the two constants replaced, for probing tightness.
pub fn check_liveness_with(
    run: &Run,
    open_lead: &Rational,
    close_lead: &Rational,
) -> Result<Verdict, CheckError> {
    let ctx = Ctx::new(run)?;
    let p = &ctx.params;
    let name = if *open_lead == p.dopen && *close_lead == p.big_dclose() {
        "liveness".to_string()
    } else {
        format!(
            "liveness with dopen := {}, Dclose := {}",
            fr(open_lead),
            fr(close_lead)
        )
    };
    let mut v = Verdict::new(name);
    let gs = ctx.traj(&gate_status());
    for iv in empty_intervals(&ctx.pattern, ctx.horizon()) {
        let from = &iv.start + open_lead;
        let to = &iv.end - close_lead;
        if from >= to {
            continue;
        }
        if iv.truncated {
            v.note(format!(
                "({}, ...) reaches the horizon; checked up to {} only, the rest is indeterminate",
                fr(&iv.start),
                fr(&to)
            ));
        }
        if let Some(w) = require(&gs, &Span::closed(from, to), &Value::atom(OPENED)) {
            v.fail(w);
        }
    }
    Ok(v)
}

/// Track statuses follow the train-motion pattern.
pub fn check_train_motion(run: &Run) -> Verdict {
    let mut v = Verdict::new("train motion");
    let horizon = run.horizon().clone();
    match (Params::from_state(run.base()), pattern_of(run)) {
        (Ok(p), Ok(pattern)) => {
            for viol in validate_pattern(&pattern, &p).violations {
                let tr = match (viol.track, viol.train) {
                    (Some(t), Some(n)) => &pattern.tracks[t][n],
                    _ => {
                        v.fail(Witness {
                            span: Span::point(int(0)),
                            expected: "a train pattern".into(),
                            observed: viol.to_string(),
                        });
                        continue;
                    }
                };
                v.fail(Witness {
                    span: Span::closed(tr.detect.clone(), tr.exit.clone()),
                    expected: viol.clause.to_string(),
                    observed: viol.to_string(),
                });
            }
        }
        (Err(e), _) | (_, Err(e)) => v.fail(Witness {
            span: Span::closed(int(0), horizon),
            expected: "a train pattern".into(),
            observed: e.to_string(),
        }),
    }
    v
}

/// The controller fires at every moment it is enabled.
pub fn check_controller_timing(run: &Run) -> Result<Verdict, CheckError> {
    let mut v = Verdict::new("controller timing");
    let report = agent_timing_report(run, CONTROLLER, None)?;
    for w in report.witnesses {
        if w.kind == crate::timeline::WitnessKind::NotFired {
            v.fail(Witness {
                span: w.span,
                expected: "Controller fires when enabled".into(),
                observed: "enabled without firing".into(),
            });
        }
    }
    Ok(v)
}

/// The gate is bounded, closes within `dclose` of a close signal and opens
/// within `dopen` of an open signal.
pub fn check_gate_timing(run: &Run) -> Result<Verdict, CheckError> {
    let p = Params::from_state(run.base())?;
    let mut v = Verdict::new("gate timing");
    let dir = trajectory_of(run, &crossing::dir());
    let gs = trajectory_of(run, &gate_status());
    let lag = |d: &str, g: &str, bound: &Rational, v: &mut Verdict| {
        let (d, g) = (Value::atom(d), Value::atom(g));
        let both = dir.zip_with(&gs, |a, b| Value::Bool(*a == d && *b == g));
        for s in positive_spans(&both) {
            if s.length() >= *bound {
                v.fail(Witness {
                    span: Span::open(s.start.clone(), &s.start + bound),
                    expected: format!("gate leaves {g} within {}", fr(bound)),
                    observed: format!("Dir = {d} and GateStatus = {g} throughout"),
                });
            }
        }
    };
    lag(CLOSE, OPENED, &p.dclose, &mut v);
    lag(OPEN, CLOSED, &p.dopen, &mut v);
    let bound = p.dclose.clone().max(p.dopen.clone());
    let report = agent_timing_report(run, GATE, Some(&bound))?;
    for w in report.witnesses {
        if w.kind == crate::timeline::WitnessKind::IdleInterval {
            v.fail(Witness {
                span: w.span,
                expected: format!("Gate fires within {}", fr(&bound)),
                observed: "enabled without firing".into(),
            });
        }
    }
    Ok(v)
}

/// The run conditions: internal changes come from agents, external ones
/// from the environment.
pub fn check_run_validity(run: &Run) -> Verdict {
    let mut v = Verdict::new("run validity");
    for viol in validate_run(run).violations {
        let span = match &viol.time {
            Some(t) => Span::point(t.clone()),
            None => Span::closed(int(0), run.horizon().clone()),
        };
        v.fail(Witness {
            span,
            expected: viol.clause.to_string(),
            observed: viol.detail,
        });
    }
    v
}

/// Train motion, controller timing and gate timing together.
pub fn check_regular(run: &Run) -> Result<Vec<Verdict>, CheckError> {
    Ok(vec![
        check_train_motion(run),
        check_controller_timing(run)?,
        check_gate_timing(run)?,
    ])
}

/// Which groups of properties to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PropertyGroup {
    Safety,
    Liveness,
    Lemmas,
    Regular,
}

impl PropertyGroup {
    pub const ALL: [PropertyGroup; 4] = [
        PropertyGroup::Safety,
        PropertyGroup::Liveness,
        PropertyGroup::Lemmas,
        PropertyGroup::Regular,
    ];
}

impl fmt::Display for PropertyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropertyGroup::Safety => "safety",
            PropertyGroup::Liveness => "liveness",
            PropertyGroup::Lemmas => "lemmas",
            PropertyGroup::Regular => "regular",
        })
    }
}

/// Run validity first, then each requested group. A group that cannot be
/// evaluated on this run, say because the track statuses are not a train
/// pattern, yields one failing verdict carrying the reason.
pub fn check(run: &Run, groups: &[PropertyGroup]) -> Result<Vec<Verdict>, CheckError> {
    let mut out = vec![check_run_validity(run)];
    let mut seen = BTreeMap::new();
    for g in groups {
        if seen.insert(*g, ()).is_some() {
            continue;
        }
        let verdicts = match g {
            PropertyGroup::Safety => check_safety(run).map(|v| vec![v]),
            PropertyGroup::Liveness => check_liveness(run).map(|v| vec![v]),
            PropertyGroup::Lemmas => check_lemmas(run),
            PropertyGroup::Regular => check_regular(run),
        };
        match verdicts {
            Ok(vs) => out.extend(vs),
            Err(CheckError::InvalidRun(why)) => {
                let mut v = Verdict::new(g.to_string());
                v.fail(Witness {
                    span: Span::closed(int(0), run.horizon().clone()),
                    expected: "a checkable crossing run".into(),
                    observed: why,
                });
                out.push(v);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn check_all(run: &Run) -> Result<Vec<Verdict>, CheckError> {
    check(run, &PropertyGroup::ALL)
}
