//! The railroad crossing: vocabulary, the Gate and Controller program,
//! initial states and train patterns.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::rule::{
    eval_guard, parse_guard_in, parse_rule_with, Environment, EvalError, Guard, Program,
};
use crate::state::{FunctionSymbol, Location, State, SymbolClass, Universe, Vocabulary};
use crate::timeline::{Breakpoint, Run, TimelineError, Trajectory};
use crate::value::{format_rational, int, Rational, Value};

pub const GATE: &str = "Gate";
pub const CONTROLLER: &str = "Controller";

pub const OPEN: &str = "open";
pub const CLOSE: &str = "close";
pub const OPENED: &str = "opened";
pub const CLOSED: &str = "closed";
pub const EMPTY: &str = "empty";
pub const COMING: &str = "coming";
pub const IN_CROSSING: &str = "inCrossing";

pub const DIR: &str = "Dir";
pub const GATE_STATUS: &str = "GateStatus";
pub const DEADLINE: &str = "Deadline";
pub const TRACK_STATUS: &str = "TrackStatus";

const OPEN_GATE: &str = "Dir = open";
const CLOSE_GATE: &str = "Dir = close";
const SIGNAL_DEADLINE: &str = "TrackStatus(x) = coming and Deadline(x) = infinity";
const SIGNAL_CLOSE: &str = "CT = Deadline(x)";
const CLEAR_DEADLINE: &str = "TrackStatus(x) = empty and Deadline(x) < infinity";
const SIGNAL_OPEN: &str = "Dir = close and SafeToOpen";
const LOCAL_SAFE: &str = "TrackStatus(x) = empty or CT + dopen < Deadline(x)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrossingError {
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("there must be at least one track")]
    NoTracks,
    #[error("{0}")]
    Pattern(PatternReport),
    #[error("track statuses do not form a train pattern: {0}")]
    NotAPattern(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

/// Whether the gate can always finish opening before the next close
/// signal: `dmin ≥ dclose + dopen`, equivalently `WaitTime ≥ dopen`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Wide,
    Narrow,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Params {
    pub dclose: Rational,
    pub dopen: Rational,
    pub dmin: Rational,
    pub dmax: Rational,
}

impl Params {
    pub fn new(
        dclose: Rational,
        dopen: Rational,
        dmin: Rational,
        dmax: Rational,
    ) -> Result<Self, CrossingError> {
        let p = Params {
            dclose,
            dopen,
            dmin,
            dmax,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_ints(dclose: i64, dopen: i64, dmin: i64, dmax: i64) -> Result<Self, CrossingError> {
        Params::new(int(dclose), int(dopen), int(dmin), int(dmax))
    }

    pub fn validate(&self) -> Result<(), CrossingError> {
        let zero = Rational::from_integer(0.into());
        for (name, v) in self.named() {
            if *v <= zero {
                return Err(CrossingError::BadParams(format!(
                    "{name} = {} must be positive",
                    format_rational(v)
                )));
            }
        }
        if self.dclose >= self.dmin {
            return Err(CrossingError::BadParams(format!(
                "dclose = {} must be below dmin = {}",
                format_rational(&self.dclose),
                format_rational(&self.dmin)
            )));
        }
        if self.dmin > self.dmax {
            return Err(CrossingError::BadParams(format!(
                "dmin = {} must not exceed dmax = {}",
                format_rational(&self.dmin),
                format_rational(&self.dmax)
            )));
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &Rational); 4] {
        [
            ("dclose", &self.dclose),
            ("dopen", &self.dopen),
            ("dmin", &self.dmin),
            ("dmax", &self.dmax),
        ]
    }

    /// `dmin − dclose`: how long the controller waits after a detection
    /// before signalling close.
    pub fn wait_time(&self) -> Rational {
        &self.dmin - &self.dclose
    }

    /// `dclose + (dmax − dmin)`: the closing lead time in the liveness bound.
    pub fn big_dclose(&self) -> Rational {
        &self.dclose + &self.dmax - &self.dmin
    }

    pub fn regime(&self) -> Regime {
        if self.wait_time() >= self.dopen {
            Regime::Wide
        } else {
            Regime::Narrow
        }
    }

    /// Reads the four constants back from a crossing state.
    pub fn from_state(s: &State) -> Result<Self, CrossingError> {
        let get = |name: &str| -> Result<Rational, CrossingError> {
            s.read(&Location::nullary(name))
                .map_err(EvalError::from)?
                .as_finite()
                .cloned()
                .ok_or_else(|| CrossingError::BadParams(format!("{name} is not a finite number")))
        };
        Params::new(get("dclose")?, get("dopen")?, get("dmin")?, get("dmax")?)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .named()
            .iter()
            .map(|(n, v)| format!("{n}={}", format_rational(v)))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

pub fn track_name(i: usize) -> String {
    format!("trk{}", i + 1)
}

pub fn track(i: usize) -> Value {
    Value::atom(track_name(i))
}

pub fn dir() -> Location {
    Location::nullary(DIR)
}

pub fn gate_status() -> Location {
    Location::nullary(GATE_STATUS)
}

pub fn deadline(track: &Value) -> Location {
    Location::new(DEADLINE, vec![track.clone()])
}

pub fn track_status(track: &Value) -> Location {
    Location::new(TRACK_STATUS, vec![track.clone()])
}

pub fn vocabulary() -> Vocabulary {
    let mut v = Vocabulary::new();
    for atom in [OPEN, CLOSE, OPENED, CLOSED, EMPTY, COMING, IN_CROSSING] {
        v.insert(FunctionSymbol::new(atom, 0, SymbolClass::Static));
    }
    for c in ["dclose", "dopen", "dmin", "dmax", "WaitTime"] {
        v.insert(FunctionSymbol::new(c, 0, SymbolClass::Static));
    }
    v.with(FunctionSymbol::new(DIR, 0, SymbolClass::Internal))
        .with(FunctionSymbol::new(GATE_STATUS, 0, SymbolClass::Internal))
        .with(FunctionSymbol::new(DEADLINE, 1, SymbolClass::Internal))
        .with(FunctionSymbol::new(TRACK_STATUS, 1, SymbolClass::External))
}

pub fn universes(tracks: usize) -> BTreeMap<String, Universe> {
    let atoms = |names: &[&str]| Universe::Finite(names.iter().map(|n| Value::atom(*n)).collect());
    BTreeMap::from([
        (
            "Tracks".to_string(),
            Universe::Finite((0..tracks).map(track).collect()),
        ),
        ("Directions".to_string(), atoms(&[OPEN, CLOSE])),
        ("GateStatuses".to_string(), atoms(&[OPENED, CLOSED])),
        (
            "TrackStatuses".to_string(),
            atoms(&[EMPTY, COMING, IN_CROSSING]),
        ),
        ("Reals".to_string(), Universe::Reals),
        ("ExtendedReals".to_string(), Universe::ExtendedReals),
    ])
}

fn guard(text: &str) -> Guard {
    parse_guard_in(text, &["x"]).expect("built-in guard parses")
}

/// `(∀x ∈ Tracks)[TrackStatus(x) = empty or CT + dopen < Deadline(x)]`.
pub fn safe_to_open_guard() -> Guard {
    Guard::forall("x", "Tracks", guard(LOCAL_SAFE))
}

/// The per-track part of SafeToOpen, with `x` free.
pub fn local_safe_guard() -> Guard {
    guard(LOCAL_SAFE)
}

/// The six constituent rules, identified by their guards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constituent {
    OpenGate,
    CloseGate,
    SignalDeadline,
    SignalClose,
    ClearDeadline,
    SignalOpen,
}

impl Constituent {
    pub const ALL: [Constituent; 6] = [
        Constituent::OpenGate,
        Constituent::CloseGate,
        Constituent::SignalDeadline,
        Constituent::SignalClose,
        Constituent::ClearDeadline,
        Constituent::SignalOpen,
    ];

    /// Whether the guard mentions the track variable `x`.
    pub fn per_track(self) -> bool {
        matches!(
            self,
            Constituent::SignalDeadline | Constituent::SignalClose | Constituent::ClearDeadline
        )
    }

    pub fn guard(self) -> Guard {
        match self {
            Constituent::OpenGate => guard(OPEN_GATE),
            Constituent::CloseGate => guard(CLOSE_GATE),
            Constituent::SignalDeadline => guard(SIGNAL_DEADLINE),
            Constituent::SignalClose => guard(SIGNAL_CLOSE),
            Constituent::ClearDeadline => guard(CLEAR_DEADLINE),
            Constituent::SignalOpen => Guard::and(guard(CLOSE_GATE), safe_to_open_guard()),
        }
    }
}

impl fmt::Display for Constituent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constituent::OpenGate => "OpenGate",
            Constituent::CloseGate => "CloseGate",
            Constituent::SignalDeadline => "SignalDeadline",
            Constituent::SignalClose => "SignalClose",
            Constituent::ClearDeadline => "ClearDeadline",
            Constituent::SignalOpen => "SignalOpen",
        })
    }
}

pub fn gate_text() -> String {
    format!(
        "block\n  \
           if {OPEN_GATE} then GateStatus := opened endif\n  \
           if {CLOSE_GATE} then GateStatus := closed endif\n\
         endblock"
    )
}

pub fn controller_text() -> String {
    format!(
        "block\n  \
           var x ranges over Tracks\n    \
             block\n      \
               if {SIGNAL_DEADLINE} then Deadline(x) := CT + WaitTime endif\n      \
               if {SIGNAL_CLOSE} then Dir := close endif\n      \
               if {CLEAR_DEADLINE} then Deadline(x) := infinity endif\n    \
             endblock\n  \
           endvar\n  \
           if {SIGNAL_OPEN} then Dir := open endif\n\
         endblock"
    )
}

/// The two-module program. `SafeToOpen` is inlined.
pub fn crossing_program() -> Program {
    let abbrev = BTreeMap::from([("SafeToOpen".to_string(), safe_to_open_guard())]);
    let gate = parse_rule_with(&gate_text(), &abbrev).expect("Gate parses");
    let controller = parse_rule_with(&controller_text(), &abbrev).expect("Controller parses");
    Program::new(
        vocabulary(),
        BTreeMap::from([
            (GATE.to_string(), gate),
            (CONTROLLER.to_string(), controller),
        ]),
    )
    .expect("crossing program is well formed")
}

/// The program with one module removed, e.g. the controller alone.
pub fn controller_program() -> Program {
    let full = crossing_program();
    let mut vocab = vocabulary();
    vocab.remove(GATE_STATUS);
    Program::new(
        vocab,
        BTreeMap::from([(
            CONTROLLER.to_string(),
            full.module(CONTROLLER).expect("controller").clone(),
        )]),
    )
    .expect("controller program is well formed")
}

fn statics(params: &Params, tracks: usize, vocab: Vocabulary) -> Result<State, CrossingError> {
    params.validate()?;
    if tracks == 0 {
        return Err(CrossingError::NoTracks);
    }
    let mut s = State::new(vocab, universes(tracks));
    let mut set = |name: &str, v: Value| {
        s.assign(Location::nullary(name), v)
            .map_err(EvalError::from)
    };
    for atom in [OPEN, CLOSE, OPENED, CLOSED, EMPTY, COMING, IN_CROSSING] {
        set(atom, Value::atom(atom))?;
    }
    for (name, v) in params.named() {
        set(name, Value::number(v.clone()))?;
    }
    set("WaitTime", Value::number(params.wait_time()))?;
    Ok(s)
}

fn initial_with(params: &Params, tracks: usize, vocab: Vocabulary) -> Result<State, CrossingError> {
    let has_gate = vocab.contains(GATE_STATUS);
    let mut s = statics(params, tracks, vocab)?;
    let mut set = |loc: Location, v: Value| s.assign(loc, v).map_err(EvalError::from);
    for i in 0..tracks {
        set(track_status(&track(i)), Value::atom(EMPTY))?;
        set(deadline(&track(i)), Value::infinity())?;
    }
    set(dir(), Value::atom(OPEN))?;
    if has_gate {
        set(gate_status(), Value::atom(OPENED))?;
    }
    Ok(s)
}

/// Every track empty with no deadline, direction open, gate opened.
pub fn initial_state(params: &Params, tracks: usize) -> Result<State, CrossingError> {
    initial_with(params, tracks, vocabulary())
}

/// Initial state over the vocabulary without `GateStatus`.
pub fn controller_initial_state(params: &Params, tracks: usize) -> Result<State, CrossingError> {
    initial_with(params, tracks, controller_program().vocabulary().clone())
}

pub fn safe_to_open(s: &State) -> Result<bool, EvalError> {
    eval_guard(s, &Environment::new(), &safe_to_open_guard())
}

/// One passage: detected at `detect`, enters the crossing at `enter`,
/// leaves at `exit`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Train {
    pub detect: Rational,
    pub enter: Rational,
    pub exit: Rational,
}

impl Train {
    pub fn new(detect: Rational, enter: Rational, exit: Rational) -> Self {
        Train {
            detect,
            enter,
            exit,
        }
    }

    pub fn from_ints(detect: i64, enter: i64, exit: i64) -> Self {
        Train::new(int(detect), int(enter), int(exit))
    }
}

impl fmt::Display for Train {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            format_rational(&self.detect),
            format_rational(&self.enter),
            format_rational(&self.exit)
        )
    }
}

/// Trains per track; track `i` is `trk{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TrainPattern {
    pub tracks: Vec<Vec<Train>>,
}

impl TrainPattern {
    pub fn new(tracks: Vec<Vec<Train>>) -> Self {
        TrainPattern { tracks }
    }

    pub fn empty(tracks: usize) -> Self {
        TrainPattern {
            tracks: vec![Vec::new(); tracks],
        }
    }

    pub fn track_count(&self) -> usize {
        self.tracks.len()
    }

    /// All detection, entry and exit moments, sorted and deduplicated.
    pub fn moments(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self
            .tracks
            .iter()
            .flatten()
            .flat_map(|t| [t.detect.clone(), t.enter.clone(), t.exit.clone()])
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn last_moment(&self) -> Rational {
        self.moments()
            .pop()
            .unwrap_or_else(|| Rational::from_integer(0.into()))
    }

    /// `TrackStatus(x)` over `[0, horizon]`, for each track.
    pub fn status_trajectories(
        &self,
        horizon: &Rational,
    ) -> Result<BTreeMap<Location, Trajectory>, CrossingError> {
        let zero = Rational::from_integer(0.into());
        let mut out = BTreeMap::new();
        for (i, trains) in self.tracks.iter().enumerate() {
            let point =
                |t: &Rational, s: &str| Breakpoint::new(t.clone(), Value::atom(s), Value::atom(s));
            let mut bps = vec![point(&zero, EMPTY)];
            for tr in trains {
                bps.push(point(&tr.detect, COMING));
                bps.push(point(&tr.enter, IN_CROSSING));
                bps.push(point(&tr.exit, EMPTY));
            }
            out.insert(
                track_status(&track(i)),
                Trajectory::from_breakpoints(horizon.clone(), bps)?,
            );
        }
        Ok(out)
    }
}

/// Which train-motion requirement a pattern breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternClause {
    /// At least one track.
    Tracks,
    /// Tracks are empty at moment 0, so the first detection is positive.
    EmptyAtStart,
    /// Detection, entry and exit strictly increase.
    Order,
    /// A train is detected only after the previous one has left.
    Separation,
    /// `dmin ≤ enter − detect ≤ dmax`.
    ApproachTime,
}

impl fmt::Display for PatternClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternClause::Tracks => "track set",
            PatternClause::EmptyAtStart => "empty at start",
            PatternClause::Order => "train order",
            PatternClause::Separation => "train separation",
            PatternClause::ApproachTime => "approach time",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternViolation {
    pub track: Option<usize>,
    pub train: Option<usize>,
    pub clause: PatternClause,
    pub detail: String,
}

impl fmt::Display for PatternViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "train motion, {}", self.clause)?;
        if let Some(t) = self.track {
            write!(f, " on {}", track_name(t))?;
        }
        if let Some(n) = self.train {
            write!(f, " train {}", n + 1)?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PatternReport {
    pub violations: Vec<PatternViolation>,
}

impl PatternReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for PatternReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_pattern(p: &TrainPattern, params: &Params) -> PatternReport {
    let mut report = PatternReport::default();
    let fr = format_rational;
    if p.tracks.is_empty() {
        report.violations.push(PatternViolation {
            track: None,
            train: None,
            clause: PatternClause::Tracks,
            detail: "the pattern has no tracks".into(),
        });
    }
    let zero = Rational::from_integer(0.into());
    for (ti, trains) in p.tracks.iter().enumerate() {
        let mut push = |train: usize, clause, detail: String| {
            report.violations.push(PatternViolation {
                track: Some(ti),
                train: Some(train),
                clause,
                detail,
            })
        };
        for (n, tr) in trains.iter().enumerate() {
            if n == 0 && tr.detect <= zero {
                push(
                    n,
                    PatternClause::EmptyAtStart,
                    format!("first detection t1 = {} must be positive", fr(&tr.detect)),
                );
            }
            if n > 0 && tr.detect <= trains[n - 1].exit {
                push(
                    n,
                    PatternClause::Separation,
                    format!(
                        "next t1 = {} is not after previous t3 = {}",
                        fr(&tr.detect),
                        fr(&trains[n - 1].exit)
                    ),
                );
            }
            if tr.enter <= tr.detect || tr.exit <= tr.enter {
                push(
                    n,
                    PatternClause::Order,
                    format!("moments {tr} are not strictly increasing"),
                );
            }
            let approach = &tr.enter - &tr.detect;
            if approach < params.dmin {
                push(
                    n,
                    PatternClause::ApproachTime,
                    format!(
                        "t2 - t1 = {} is below dmin = {}",
                        fr(&approach),
                        fr(&params.dmin)
                    ),
                );
            } else if approach > params.dmax {
                push(
                    n,
                    PatternClause::ApproachTime,
                    format!(
                        "t2 - t1 = {} exceeds dmax = {}",
                        fr(&approach),
                        fr(&params.dmax)
                    ),
                );
            }
        }
    }
    report
}

/// Number of tracks in a crossing state.
pub fn track_count(s: &State) -> Result<usize, CrossingError> {
    match s.universe("Tracks").map_err(EvalError::from)? {
        Universe::Finite(v) => Ok(v.len()),
        _ => Err(CrossingError::NoTracks),
    }
}

/// Recovers the train pattern from a run's `TrackStatus` trajectories.
pub fn pattern_of(run: &Run) -> Result<TrainPattern, CrossingError> {
    let tracks = track_count(run.base())?;
    let mut out = Vec::with_capacity(tracks);
    for i in 0..tracks {
        let loc = track_status(&track(i));
        let traj = match run.trajectory(&loc) {
            Some(t) => t,
            None => {
                if run.base().read(&loc).map_err(EvalError::from)? != Value::atom(EMPTY) {
                    return Err(CrossingError::NotAPattern(format!(
                        "{loc} is not empty at 0"
                    )));
                }
                out.push(Vec::new());
                continue;
            }
        };
        if traj.initial() != &Value::atom(EMPTY) {
            return Err(CrossingError::NotAPattern(format!(
                "{loc} is not empty at 0"
            )));
        }
        if let Some(b) = traj.right_changes().next() {
            return Err(CrossingError::NotAPattern(format!(
                "{loc} changes between {0} and {0}+",
                format_rational(&b.time)
            )));
        }
        let cycle = [COMING, IN_CROSSING, EMPTY];
        let mut moments = Vec::new();
        for (k, b) in traj.left_changes().enumerate() {
            let expected = cycle[k % 3];
            if b.at != Value::atom(expected) {
                return Err(CrossingError::NotAPattern(format!(
                    "{loc} becomes {} at {} where {expected} was due",
                    b.at,
                    format_rational(&b.time)
                )));
            }
            moments.push(b.time.clone());
        }
        if moments.len() % 3 != 0 {
            return Err(CrossingError::NotAPattern(format!(
                "{loc} is not empty at the horizon"
            )));
        }
        out.push(
            moments
                .chunks(3)
                .map(|c| Train::new(c[0].clone(), c[1].clone(), c[2].clone()))
                .collect(),
        );
    }
    Ok(TrainPattern::new(out))
}
