use std::collections::BTreeSet;
use std::fmt;

use crate::rule::{collect_updates, Environment};
use crate::state::{consistent, Location, SymbolClass, Update, UpdateSet, CURRENT_TIME};
use crate::value::{format_rational, Rational};

use super::{Run, Side, TimelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MomentKind {
    /// `r(t+) ≠ r(t)`.
    pub internal: bool,
    /// `r(t) ≠ r(t−)`, for `t > 0`.
    pub external: bool,
}

impl MomentKind {
    pub fn label(&self) -> &'static str {
        match (self.internal, self.external) {
            (true, true) => "both",
            (true, false) => "internal",
            (false, true) => "external",
            (false, false) => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignificantMoment {
    pub time: Rational,
    pub kind: MomentKind,
    /// Agents whose head locations change between `t` and `t+`.
    pub agents: BTreeSet<String>,
}

fn kind_at(run: &Run, t: &Rational) -> MomentKind {
    let mut kind = MomentKind::default();
    for traj in run.trajectories().values() {
        let at = traj.value_unchecked(t, Side::At);
        if traj.value_unchecked(t, Side::Plus) != at {
            kind.internal = true;
        }
        if *t > Rational::from_integer(0.into()) && traj.value_unchecked(t, Side::Minus) != at {
            kind.external = true;
        }
    }
    kind
}

fn firing_agents(run: &Run, t: &Rational) -> BTreeSet<String> {
    run.program()
        .modules()
        .iter()
        .filter(|(_, rule)| {
            let heads = rule.heads();
            run.trajectories().iter().any(|(loc, traj)| {
                heads.contains(&loc.symbol)
                    && traj.value_unchecked(t, Side::At) != traj.value_unchecked(t, Side::Plus)
            })
        })
        .map(|(name, _)| name.clone())
        .collect()
}

/// Moment 0 and every moment where the state differs from one of its
/// one-sided limits, in increasing order.
pub fn significant_moments(run: &Run) -> Vec<SignificantMoment> {
    run.breakpoints()
        .into_iter()
        .filter_map(|t| {
            let kind = kind_at(run, &t);
            let is_zero = t == Rational::from_integer(0.into());
            (is_zero || kind.internal || kind.external).then(|| SignificantMoment {
                agents: firing_agents(run, &t),
                time: t,
                kind,
            })
        })
        .collect()
}

/// Which run condition a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    /// Changes from `t` to `t+` must be the effect of executing agents, and
    /// leave external locations alone.
    InternalStep,
    /// Changes from `t−` to `t` may touch external locations only.
    EnvironmentStep,
    /// Trajectories must be finite, ordered and canonical.
    Discreteness,
    /// `CT` is the identity and cannot be stored.
    CurrentTime,
    /// Trajectories must belong to dynamic symbols of the vocabulary.
    Vocabulary,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::InternalStep => "internal step",
            Clause::EnvironmentStep => "environment step",
            Clause::Discreteness => "discreteness",
            Clause::CurrentTime => "current time",
            Clause::Vocabulary => "vocabulary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub time: Option<Rational>,
    pub clause: Clause,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.time {
            Some(t) => write!(
                f,
                "[{}] at {}: {}",
                self.clause,
                format_rational(t),
                self.detail
            ),
            None => write!(f, "[{}] {}", self.clause, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunReport {
    pub violations: Vec<Violation>,
}

impl RunReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_at(&self, clause: Clause) -> Option<&Violation> {
        self.violations.iter().find(|v| v.clause == clause)
    }
}

fn describe(us: &UpdateSet) -> String {
    let parts: Vec<String> = us.iter().map(Update::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Checks the run conditions on every breakpoint. Violations are returned
/// as data; evaluation failures surface as violations too.
pub fn validate_run(run: &Run) -> RunReport {
    let mut report = RunReport::default();
    let vocab = run.program().vocabulary();
    let mut internal_locs: Vec<&Location> = Vec::new();
    let mut external_locs: Vec<&Location> = Vec::new();

    for (loc, traj) in run.trajectories() {
        let mut push = |clause, detail: String| {
            report.violations.push(Violation {
                time: None,
                clause,
                detail,
            })
        };
        if loc.symbol == CURRENT_TIME {
            push(
                Clause::CurrentTime,
                format!("{CURRENT_TIME} must not have a stored trajectory"),
            );
            continue;
        }
        match vocab.get(&loc.symbol) {
            None => push(Clause::Vocabulary, format!("{loc} has an unknown symbol")),
            Some(sym) if sym.arity != loc.args.len() => {
                push(Clause::Vocabulary, format!("{loc} has the wrong arity"))
            }
            Some(sym) if sym.class == SymbolClass::Static => push(
                Clause::Vocabulary,
                format!("{loc} is static but has a trajectory"),
            ),
            Some(sym) if sym.class == SymbolClass::Internal => internal_locs.push(loc),
            Some(_) => external_locs.push(loc),
        }
        if let Err(e) = traj.check_shape() {
            push(Clause::Discreteness, format!("{loc}: {e}"));
        } else if !traj.is_canonical() {
            push(
                Clause::Discreteness,
                format!("{loc}: trajectory is not canonical"),
            );
        }
        if traj.horizon() != run.horizon() {
            push(
                Clause::Discreteness,
                format!("{loc}: horizon differs from the run's"),
            );
        }
    }
    if !report.is_ok() {
        return report;
    }

    let zero = Rational::from_integer(0.into());
    for t in run.breakpoints() {
        let mut push = |clause, detail: String| {
            report.violations.push(Violation {
                time: Some(t.clone()),
                clause,
                detail,
            })
        };
        let value = |loc: &Location, side| run.trajectories()[loc].value_unchecked(&t, side);

        for loc in &external_locs {
            if value(loc, Side::At) != value(loc, Side::Plus) {
                push(
                    Clause::InternalStep,
                    format!("external {loc} changes between t and t+"),
                );
            }
        }
        if t > zero {
            for loc in &internal_locs {
                let (before, at) = (value(loc, Side::Minus), value(loc, Side::At));
                if before != at {
                    push(
                        Clause::EnvironmentStep,
                        format!("internal {loc} changes from {before} to {at} between t- and t"),
                    );
                }
            }
        }

        let delta: UpdateSet = internal_locs
            .iter()
            .filter(|loc| value(loc, Side::At) != value(loc, Side::Plus))
            .map(|loc| Update::new((*loc).clone(), value(loc, Side::Plus)))
            .collect();
        if delta.is_empty() {
            continue;
        }
        match explain_step(run, &t, &delta) {
            Ok(true) => {}
            Ok(false) => {
                let state = run.state_unchecked(&t, Side::At);
                let sets: Vec<String> = run
                    .program()
                    .modules()
                    .iter()
                    .map(
                        |(name, rule)| match collect_updates(&state, &Environment::new(), rule) {
                            Ok(us) => format!("{name} {}", describe(&us)),
                            Err(e) => format!("{name} <{e}>"),
                        },
                    )
                    .collect();
                push(
                    Clause::InternalStep,
                    format!(
                        "changes {} are not the effect of any set of agents (update sets: {})",
                        describe(&delta),
                        sets.join("; ")
                    ),
                );
            }
            Err(e) => push(Clause::InternalStep, format!("evaluation failed: {e}")),
        }
    }
    report
}

/// Whether some nonempty set of modules, executed together at `t`, yields
/// exactly `delta`.
fn explain_step(run: &Run, t: &Rational, delta: &UpdateSet) -> Result<bool, TimelineError> {
    let state = run.state_unchecked(t, Side::At);
    let sets: Vec<UpdateSet> = run
        .program()
        .modules()
        .values()
        .map(|rule| collect_updates(&state, &Environment::new(), rule))
        .collect::<Result<_, _>>()?;
    let n = sets.len();
    for mask in 1u32..(1u32 << n) {
        let union: UpdateSet = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .flat_map(|i| sets[i].iter().cloned())
            .collect();
        if consistent(&union) && state.nontrivial(&union)? == *delta {
            return Ok(true);
        }
    }
    Ok(false)
}
