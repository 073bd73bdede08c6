use std::collections::BTreeMap;

use crate::rule::{collect_updates, critical_times, enabled, Environment, Program};
use crate::state::{consistent, Location, State, SymbolClass, UpdateSet};
use crate::value::{midpoint, Rational};

use super::{Breakpoint, Run, Side, TimelineError, Trajectory};

const MAX_STEPS: usize = 100_000;

/// How an agent reacts once enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentTiming {
    /// Fires at every moment it is enabled.
    Immediate,
    /// Fires once it has been continuously enabled for the given time.
    Delayed(Rational),
}

/// Forward event-driven execution of `program` from `initial`, with the
/// environment driving the `external` trajectories. Agents missing from
/// `timing` are immediate.
pub fn simulate(
    program: &Program,
    initial: &State,
    external: &BTreeMap<Location, Trajectory>,
    horizon: Rational,
    timing: &BTreeMap<String, AgentTiming>,
) -> Result<Run, TimelineError> {
    let env = Environment::new();
    let vocab = program.vocabulary();
    let point_state = |cur: &State, t: &Rational| -> Result<State, TimelineError> {
        let mut s = cur.at_time(t);
        for (loc, traj) in external {
            s.assign(loc.clone(), traj.value_unchecked(t, Side::At))?;
        }
        Ok(s)
    };
    let mut external_moments: Vec<Rational> = external
        .values()
        .flat_map(|tr| tr.breakpoints().iter().map(|b| b.time.clone()))
        .collect();
    external_moments.sort();
    external_moments.dedup();

    let mut history: BTreeMap<Location, Vec<Breakpoint>> = BTreeMap::new();
    for (loc, v) in initial.entries() {
        if vocab.class_of(&loc.symbol) == Some(SymbolClass::Internal) {
            history.insert(
                loc.clone(),
                vec![Breakpoint::new(
                    Rational::from_integer(0.into()),
                    v.clone(),
                    v.clone(),
                )],
            );
        }
    }

    let mut cur = initial.clone();
    let mut t = Rational::from_integer(0.into());
    let mut pending: BTreeMap<String, Rational> = BTreeMap::new();
    let timing_of = |agent: &str| timing.get(agent).cloned().unwrap_or(AgentTiming::Immediate);

    for _ in 0..MAX_STEPS {
        let s = point_state(&cur, &t)?;
        let mut union = UpdateSet::new();
        for (agent, rule) in program.modules() {
            let on = enabled(&s, rule)?;
            let fire = match timing_of(agent) {
                AgentTiming::Immediate => on,
                AgentTiming::Delayed(d) => {
                    if on {
                        let since = pending.entry(agent.clone()).or_insert_with(|| t.clone());
                        &*since + &d <= t
                    } else {
                        pending.remove(agent);
                        false
                    }
                }
            };
            if fire {
                pending.remove(agent);
                union.extend(collect_updates(&s, &env, rule)?);
            }
        }
        if !consistent(&union) {
            return Err(TimelineError::Inconsistent(t));
        }
        for u in s.nontrivial(&union)? {
            let old = s.read(&u.location)?;
            let entry = history.entry(u.location.clone()).or_insert_with(|| {
                vec![Breakpoint::new(
                    Rational::from_integer(0.into()),
                    old.clone(),
                    old.clone(),
                )]
            });
            if entry.last().is_some_and(|b| b.time == t) {
                entry.last_mut().unwrap().right = u.value.clone();
            } else {
                entry.push(Breakpoint::new(t.clone(), old, u.value.clone()));
            }
            cur.assign(u.location, u.value)?;
        }

        if t >= horizon {
            let trajectories = history
                .into_iter()
                .map(|(loc, bps)| Ok((loc, Trajectory::from_breakpoints(horizon.clone(), bps)?)))
                .chain(external.iter().map(|(l, tr)| Ok((l.clone(), tr.clone()))))
                .collect::<Result<BTreeMap<_, _>, TimelineError>>()?;
            return Ok(Run::new(
                program.clone(),
                initial.clone(),
                trajectories,
                horizon,
            ));
        }

        let mut next = external_moments
            .iter()
            .find(|m| **m > t)
            .cloned()
            .unwrap_or_else(|| horizon.clone())
            .min(horizon.clone());
        let after = point_state(&cur, &midpoint(&t, &next))?;
        for rule in program.modules().values() {
            if let Some(r) = critical_times(&after, &env, rule)?
                .into_iter()
                .find(|r| *r > t)
            {
                next = next.min(r);
            }
        }
        let during = point_state(&cur, &midpoint(&t, &next))?;
        for (agent, rule) in program.modules() {
            if let AgentTiming::Delayed(d) = timing_of(agent) {
                if enabled(&during, rule)? {
                    let since = pending.entry(agent.clone()).or_insert_with(|| t.clone());
                    let due = &*since + &d;
                    if due > t {
                        next = next.min(due);
                    }
                } else {
                    pending.remove(agent);
                }
            }
        }
        t = next;
    }
    Err(TimelineError::TooManySteps(MAX_STEPS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rule::parse_rule;
    use crate::state::{FunctionSymbol, Vocabulary};
    use crate::value::{int, Value};

    fn toggle_program() -> (Program, State) {
        let vocab = Vocabulary::new()
            .with(FunctionSymbol::new("f", 0, SymbolClass::External))
            .with(FunctionSymbol::new("g", 0, SymbolClass::Internal));
        let x = parse_rule("if f = 1 and g = 0 then g := 1 endif").unwrap();
        let program = Program::new(vocab.clone(), [("X".to_string(), x)].into()).unwrap();
        let s = State::new(vocab, BTreeMap::new())
            .with(Location::nullary("f"), Value::number(int(0)))
            .unwrap()
            .with(Location::nullary("g"), Value::number(int(0)))
            .unwrap();
        (program, s)
    }

    fn step(at: i64, before: i64, after: i64) -> Trajectory {
        Trajectory::from_breakpoints(
            int(10),
            vec![
                Breakpoint::new(
                    int(0),
                    Value::number(int(before)),
                    Value::number(int(before)),
                ),
                Breakpoint::new(
                    int(at),
                    Value::number(int(after)),
                    Value::number(int(after)),
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn immediate_agent_reacts_at_the_external_change() {
        let (program, s) = toggle_program();
        let ext = [(Location::nullary("f"), step(3, 0, 1))].into();
        let run = simulate(&program, &s, &ext, int(10), &BTreeMap::new()).unwrap();
        let g = Location::nullary("g");
        assert_eq!(
            run.value_at(&g, &int(3), Side::At).unwrap(),
            Value::number(int(0))
        );
        assert_eq!(
            run.value_at(&g, &int(3), Side::Plus).unwrap(),
            Value::number(int(1))
        );
    }

    #[test]
    fn delayed_agent_waits() {
        let (program, s) = toggle_program();
        let ext = [(Location::nullary("f"), step(3, 0, 1))].into();
        let timing = [("X".to_string(), AgentTiming::Delayed(int(2)))].into();
        let run = simulate(&program, &s, &ext, int(10), &timing).unwrap();
        let g = run.trajectory(&Location::nullary("g")).unwrap();
        let changes: Vec<_> = g.right_changes().map(|b| b.time.clone()).collect();
        assert_eq!(changes, vec![int(5)]);
    }
}
