//! Shared fixtures and an independent event-queue model of the crossing.
//!
//! The oracle never touches the rule interpreter, the builder or the
//! checker. It walks the pattern's moments in order, applies the
//! controller's four reactions by hand, and moves the gate once a delay has
//! elapsed without the direction changing in between.

#![allow(dead_code)]

pub mod props;

use std::collections::BTreeSet;

use crossing_core::builder::{build_run, DelayPolicy};
use crossing_core::checker::{check_all, Verdict};
use crossing_core::crossing::{self, Params, Train, TrainPattern};
use crossing_core::state::Location;
use crossing_core::timeline::{Run, Side, Span};
use crossing_core::value::{format_rational, int, rat, Rational, Value};

pub fn worked_params() -> Params {
    Params::from_ints(1, 2, 4, 6).unwrap()
}

pub fn worked_pattern() -> TrainPattern {
    TrainPattern::new(vec![vec![Train::from_ints(10, 15, 22)]])
}

pub fn worked_delays() -> Vec<Rational> {
    vec![rat(1, 2), int(1)]
}

pub fn worked_run() -> Run {
    build_run(
        &worked_pattern(),
        &worked_params(),
        &int(40),
        &DelayPolicy::Explicit(worked_delays()),
    )
    .unwrap()
    .0
}

/// One location's history: the value at 0 and every change as
/// `(time, value at t, value just after t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    pub initial: String,
    pub changes: Vec<(Rational, String, String)>,
}

impl History {
    fn new(initial: &str) -> Self {
        History {
            initial: initial.to_string(),
            changes: Vec::new(),
        }
    }

    fn last(&self) -> &str {
        self.changes.last().map_or(&self.initial, |c| &c.2)
    }

    /// Internal change from `t` to `t+`.
    fn set_after(&mut self, t: &Rational, v: &str) {
        if self.last() != v {
            let old = self.last().to_string();
            self.changes.push((t.clone(), old, v.to_string()));
        }
    }

    pub fn value(&self, t: &Rational, side: Side) -> String {
        let mut v = self.initial.clone();
        for (time, at, after) in &self.changes {
            if time < t {
                v = after.clone();
            } else if time == t {
                return match side {
                    Side::Minus => v,
                    Side::At => at.clone(),
                    Side::Plus => after.clone(),
                };
            }
        }
        v
    }
}

fn status(trains: &[Train], t: &Rational) -> &'static str {
    for tr in trains {
        if tr.detect <= *t && *t < tr.enter {
            return "coming";
        }
        if tr.enter <= *t && *t < tr.exit {
            return "inCrossing";
        }
    }
    "empty"
}

/// Expected `Dir`, per-track `Deadline` and, with delays, `GateStatus`.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub dir: History,
    pub deadlines: Vec<History>,
    pub gate: Option<History>,
    /// Moments where the controller reacted, in order.
    pub moments: Vec<Rational>,
}

const INF: &str = "infinity";

pub fn oracle(params: &Params, pattern: &TrainPattern, delays: Option<&[Rational]>) -> Oracle {
    let wait = &params.dmin - &params.dclose;
    let n = pattern.tracks.len();
    let mut dir = History::new("open");
    let mut deadlines: Vec<History> = (0..n).map(|_| History::new(INF)).collect();
    let mut deadline: Vec<Option<Rational>> = vec![None; n];
    let mut dir_now = "open";

    let mut queue: BTreeSet<Rational> = BTreeSet::from([int(0)]);
    for trains in &pattern.tracks {
        for tr in trains {
            queue.extend([tr.detect.clone(), tr.enter.clone(), tr.exit.clone()]);
        }
    }
    let mut moments = Vec::new();
    while let Some(t) = queue.pop_first() {
        let safe = (0..n).all(|x| {
            status(&pattern.tracks[x], &t) == "empty"
                || deadline[x].as_ref().is_none_or(|d| &t + &params.dopen < *d)
        });
        let mut new_dir: Option<&str> = None;
        let mut reacted = false;
        for x in 0..n {
            let ts = status(&pattern.tracks[x], &t);
            if ts == "coming" && deadline[x].is_none() {
                let d = &t + &wait;
                deadlines[x].set_after(&t, &format_rational(&d));
                queue.insert(d.clone());
                deadline[x] = Some(d);
                reacted = true;
            } else if ts == "empty" && deadline[x].is_some() {
                deadlines[x].set_after(&t, INF);
                deadline[x] = None;
                reacted = true;
            } else if deadline[x].as_ref() == Some(&t) {
                new_dir = Some("close");
            }
        }
        if dir_now == "close" && safe {
            assert!(
                new_dir.is_none(),
                "controller asked to both open and close at {t}"
            );
            new_dir = Some("open");
        }
        if let Some(d) = new_dir {
            if d != dir_now {
                dir.set_after(&t, d);
                dir_now = d;
                reacted = true;
            }
        }
        if reacted {
            moments.push(t);
        }
    }

    let gate = delays.map(|delays| {
        let mut gs = History::new("opened");
        for (i, (t, _, d)) in dir.changes.iter().enumerate() {
            let due = t + &delays[i];
            let interrupted = dir.changes.get(i + 1).is_some_and(|next| next.0 < due);
            if !interrupted {
                gs.set_after(&due, if d == "close" { "closed" } else { "opened" });
            }
        }
        gs
    });
    Oracle {
        dir,
        deadlines,
        gate,
        moments,
    }
}

/// Compares `run` with the oracle at every change point of either, on
/// every side, and at the midpoints between them. Agreement there means
/// the piecewise-constant trajectories are equal.
pub fn compare(run: &Run, o: &Oracle) -> Result<(), String> {
    let mut locs: Vec<(Location, &History)> = vec![(crossing::dir(), &o.dir)];
    for (i, h) in o.deadlines.iter().enumerate() {
        locs.push((crossing::deadline(&crossing::track(i)), h));
    }
    if let Some(g) = &o.gate {
        locs.push((crossing::gate_status(), g));
    }
    let mut times: BTreeSet<Rational> = run.breakpoints().into_iter().collect();
    for (_, h) in &locs {
        times.extend(h.changes.iter().map(|c| c.0.clone()));
    }
    times.insert(run.horizon().clone());
    let times: Vec<Rational> = times.into_iter().filter(|t| t <= run.horizon()).collect();
    let mut probes: Vec<(Rational, Side)> = Vec::new();
    for (i, t) in times.iter().enumerate() {
        if *t > int(0) {
            probes.push((t.clone(), Side::Minus));
        }
        probes.push((t.clone(), Side::At));
        probes.push((t.clone(), Side::Plus));
        if let Some(next) = times.get(i + 1) {
            probes.push(((t + next) / int(2), Side::At));
        }
    }
    for (loc, h) in locs {
        for (t, side) in &probes {
            let got = run
                .value_at(&loc, t, *side)
                .map_err(|e| e.to_string())?
                .to_string();
            let want = h.value(t, *side);
            if got != want {
                return Err(format!(
                    "{loc} at {t} ({side:?}): run has {got}, oracle has {want}"
                ));
            }
        }
    }
    Ok(())
}

/// `(time, new direction)` for every `Dir` change of a run.
pub fn dir_changes(run: &Run) -> Vec<(Rational, String)> {
    run.trajectory(&crossing::dir())
        .map(|t| {
            t.right_changes()
                .map(|b| (b.time.clone(), b.right.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

pub fn by_name<'a>(verdicts: &'a [Verdict], name: &str) -> &'a Verdict {
    verdicts
        .iter()
        .find(|v| v.property == name)
        .unwrap_or_else(|| panic!("no verdict named {name}"))
}

/// A single-segment edit of the worked run and the verdict that must catch
/// it, with the moment its first witness must start at.
pub struct Mutation {
    pub name: &'static str,
    pub verdict: &'static str,
    pub moment: Rational,
    pub apply: fn(&mut Run),
}

fn overwrite(run: &mut Run, loc: &Location, span: Span, value: Value) {
    run.trajectory_mut(loc)
        .expect("location has a trajectory")
        .overwrite(&span, value);
}

fn deadline() -> Location {
    crossing::deadline(&crossing::track(0))
}

fn ts() -> Location {
    crossing::track_status(&crossing::track(0))
}

pub fn mutations() -> Vec<Mutation> {
    use crossing::{CLOSE, CLOSED, COMING, OPEN, OPENED};
    vec![
        Mutation {
            name: "gate opened during the crossing",
            verdict: "safety",
            moment: int(16),
            apply: |r| {
                overwrite(
                    r,
                    &crossing::gate_status(),
                    Span::open(int(16), int(17)),
                    Value::atom(OPENED),
                )
            },
        },
        Mutation {
            name: "Dir reopened inside the closing window",
            verdict: "uninterrupted closing",
            moment: rat(66, 5),
            apply: |r| {
                overwrite(
                    r,
                    &crossing::dir(),
                    Span::open(rat(66, 5), int(14)),
                    Value::atom(OPEN),
                )
            },
        },
        Mutation {
            name: "Deadline changed by the environment",
            verdict: "run validity",
            moment: int(15),
            apply: |r| {
                overwrite(
                    r,
                    &deadline(),
                    Span::closed_open(int(15), int(22)),
                    Value::number(int(14)),
                )
            },
        },
        Mutation {
            name: "TrackStatus changed by an agent",
            verdict: "run validity",
            moment: int(15),
            apply: |r| overwrite(r, &ts(), Span::open(int(15), int(16)), Value::atom(COMING)),
        },
        Mutation {
            name: "Deadline set one unit late",
            verdict: "deadline",
            moment: int(10),
            apply: |r| {
                overwrite(
                    r,
                    &deadline(),
                    Span::open_closed(int(10), int(22)),
                    Value::number(int(14)),
                )
            },
        },
        Mutation {
            name: "gate held closed after the train left",
            verdict: "liveness",
            moment: int(24),
            apply: |r| {
                overwrite(
                    r,
                    &crossing::gate_status(),
                    Span::open_closed(int(23), int(25)),
                    Value::atom(CLOSED),
                )
            },
        },
        Mutation {
            name: "Dir held at close after the crossing emptied",
            verdict: "dir",
            moment: int(22),
            apply: |r| {
                overwrite(
                    r,
                    &crossing::dir(),
                    Span::open_closed(int(22), int(23)),
                    Value::atom(CLOSE),
                )
            },
        },
        Mutation {
            name: "controller late to signal close",
            verdict: "controller timing",
            moment: int(13),
            apply: |r| {
                overwrite(
                    r,
                    &crossing::dir(),
                    Span::open_closed(int(13), rat(27, 2)),
                    Value::atom(OPEN),
                )
            },
        },
    ]
}

pub struct MutationOutcome {
    pub name: &'static str,
    pub verdict: &'static str,
    pub expected: Rational,
    pub observed: Option<Rational>,
    /// Other verdicts that also failed.
    pub collateral: Vec<String>,
}

impl MutationOutcome {
    pub fn detected(&self) -> bool {
        self.observed.as_ref() == Some(&self.expected)
    }
}

pub fn run_mutation(m: &Mutation) -> MutationOutcome {
    let mut run = worked_run();
    (m.apply)(&mut run);
    let verdicts = check_all(&run).expect("mutated runs remain checkable");
    let target = by_name(&verdicts, m.verdict);
    MutationOutcome {
        name: m.name,
        verdict: m.verdict,
        expected: m.moment.clone(),
        observed: if target.failed() {
            target.first_moment().cloned()
        } else {
            None
        },
        collateral: verdicts
            .iter()
            .filter(|v| v.failed() && v.property != m.verdict)
            .map(|v| v.property.clone())
            .collect(),
    }
}
