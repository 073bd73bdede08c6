//! Property bodies shared by the proptest suite and the acceptance run.
//! Each returns a `TestCaseError` on the first violated expectation.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use crossing_core::crossing::{self, CONTROLLER};
use crossing_core::fuzz::{generate_case, FuzzConfig};
use crossing_core::rule::{enabled, parse_rule, parse_term_in, Environment, Program};
use crossing_core::state::{
    FunctionSymbol, Location, State, SymbolClass, Update, UpdateSet, Vocabulary,
};
use crossing_core::timeline::{
    agent_timing_report, significant_moments, simulate, AgentTiming, Breakpoint, Run, Side,
    Trajectory,
};
use crossing_core::value::{int, rat, Rational, Value};

type Outcome = Result<(), TestCaseError>;

fn fuzzed_run(seed: u64, index: u64) -> Run {
    let config = FuzzConfig {
        max_tracks: 3,
        max_trains: 4,
        horizon: int(80),
    };
    generate_case(seed, index, &config).build().unwrap().0
}

fn nullary_vocab(external: &[&str], internal: &[&str]) -> Vocabulary {
    let mut v = Vocabulary::new();
    for n in external {
        v.insert(FunctionSymbol::new(*n, 0, SymbolClass::External));
    }
    for n in internal {
        v.insert(FunctionSymbol::new(*n, 0, SymbolClass::Internal));
    }
    v
}

fn state(vocab: &Vocabulary, values: &[(&str, i64)]) -> State {
    let mut s = State::new(vocab.clone(), BTreeMap::new());
    for (n, v) in values {
        s.assign(Location::nullary(*n), Value::number(int(*v)))
            .unwrap();
    }
    s
}

fn step(horizon: &Rational, at: &Rational, before: i64, after: i64) -> Trajectory {
    let (b, a) = (Value::number(int(before)), Value::number(int(after)));
    Trajectory::from_breakpoints(
        horizon.clone(),
        vec![
            Breakpoint::new(int(0), b.clone(), b),
            Breakpoint::new(at.clone(), a.clone(), a),
        ],
    )
    .unwrap()
}

pub fn moment() -> impl Strategy<Value = Rational> {
    (1i64..400, 1i64..8).prop_map(|(n, d)| rat(n, d))
}

/// Terms free of external symbols keep their value from `t−` to `t`;
/// terms free of internal symbols keep it from `t` to `t+`.
pub fn preservation(seed: u64, index: u64) -> Outcome {
    let run = fuzzed_run(seed, index);
    let internal_terms = ["Dir", "GateStatus", "Deadline(x)", "Deadline(x) + dopen"];
    let external_terms = ["TrackStatus(x)", "TrackStatus(x) = empty"];
    let env = Environment::from([("x".to_string(), crossing::track(0))]);
    for t in run.breakpoints().into_iter().filter(|t| *t > int(0)) {
        for text in internal_terms {
            let e = parse_term_in(text, &["x"]).unwrap();
            prop_assert_eq!(
                run.term_value(&e, &env, &t, Side::Minus).unwrap(),
                run.term_value(&e, &env, &t, Side::At).unwrap(),
                "{} at {}",
                text,
                t
            );
        }
        for text in external_terms {
            let e = parse_term_in(text, &["x"]).unwrap();
            prop_assert_eq!(
                run.term_value(&e, &env, &t, Side::At).unwrap(),
                run.term_value(&e, &env, &t, Side::Plus).unwrap(),
                "{} at {}",
                text,
                t
            );
        }
    }
    Ok(())
}

/// The controller is immediate, so each moment it is enabled is
/// isolated: disabled just before and just after.
pub fn controller_is_immediate_and_isolated(seed: u64, index: u64) -> Outcome {
    let run = fuzzed_run(seed, index);
    let report = agent_timing_report(&run, CONTROLLER, None).unwrap();
    prop_assert!(report.immediate, "{:?}", report.witnesses);
    prop_assert!(report.isolated, "{:?}", report.witnesses);
    let enabled = run.enabled_signal(CONTROLLER).unwrap();
    for t in &report.enabled_moments {
        prop_assert_eq!(enabled.value_at(t, Side::Plus).unwrap(), Value::Bool(false));
        if *t > int(0) {
            prop_assert_eq!(
                enabled.value_at(t, Side::Minus).unwrap(),
                Value::Bool(false)
            );
        }
    }
    Ok(())
}

/// Two different values for one location make the update set
/// inconsistent; performing it leaves the state alone, and a rule that
/// produces it is not enabled.
pub fn inconsistent_update_set_is_a_no_op(f: i64, g: i64, a: i64, b: i64, extra: i64) -> Outcome {
    prop_assume!(a != b);
    let vocab = nullary_vocab(&[], &["f", "g"]);
    let s = state(&vocab, &[("f", f), ("g", g)]);
    let us: UpdateSet = [
        Update::new(Location::nullary("f"), Value::number(int(a))),
        Update::new(Location::nullary("f"), Value::number(int(b))),
        Update::new(Location::nullary("g"), Value::number(int(extra))),
    ]
    .into_iter()
    .collect();
    let (next, changed) = s.apply_updates(&us).unwrap();
    prop_assert_eq!(next, s.clone());
    prop_assert!(!changed);
    let rule = parse_rule(&format!("block f := {a} f := {b} g := {extra} endblock")).unwrap();
    prop_assert!(!enabled(&s, &rule).unwrap());
    Ok(())
}

/// A rule whose updates are all trivial is not enabled; one nontrivial
/// update is enough.
pub fn trivial_updates_do_not_enable(f: i64, g: i64, h: i64) -> Outcome {
    let vocab = nullary_vocab(&[], &["f", "g"]);
    let s = state(&vocab, &[("f", f), ("g", g)]);
    let trivial = parse_rule(&format!("block f := {f} g := {g} endblock")).unwrap();
    prop_assert!(!enabled(&s, &trivial).unwrap());
    let mixed = parse_rule(&format!("block f := {f} g := {h} endblock")).unwrap();
    prop_assert_eq!(enabled(&s, &mixed).unwrap(), g != h);
    Ok(())
}

/// An external change at `t` that enables an immediate agent: the
/// external value is new at `t`, the agent fires at `t`, and its output
/// is old at `t` and new at `t+`.
pub fn external_change_then_immediate_reaction(t: Rational, old: i64, new: i64) -> Outcome {
    let vocab = nullary_vocab(&["f"], &["g"]);
    let x = parse_rule(&format!("if f = {new} and g = 0 then g := 1 endif")).unwrap();
    let program = Program::new(vocab.clone(), [("X".to_string(), x)].into()).unwrap();
    let initial = state(&vocab, &[("f", old), ("g", 0)]);
    let horizon = &t + int(10);
    let ext = [(Location::nullary("f"), step(&horizon, &t, old, new))].into();
    let run = simulate(&program, &initial, &ext, horizon, &BTreeMap::new()).unwrap();
    let (f, g) = (Location::nullary("f"), Location::nullary("g"));
    let num = |n| Value::number(int(n));
    prop_assert_eq!(run.value_at(&f, &t, Side::Minus).unwrap(), num(old));
    prop_assert_eq!(run.value_at(&f, &t, Side::At).unwrap(), num(new));
    prop_assert_eq!(run.value_at(&g, &t, Side::At).unwrap(), num(0));
    prop_assert_eq!(run.value_at(&g, &t, Side::Plus).unwrap(), num(1));
    let m = significant_moments(&run);
    let at_t = m.iter().find(|m| m.time == t).unwrap();
    prop_assert!(at_t.kind.internal && at_t.kind.external);
    prop_assert!(at_t.agents.contains("X"));
    Ok(())
}

/// An agent enabled by another agent's firing at `t` is disabled at `t`
/// and can only fire after `t`.
pub fn chained_agent_fires_strictly_later(t: Rational, d: Rational) -> Outcome {
    let vocab = nullary_vocab(&["f"], &["g", "h"]);
    let x = parse_rule("if f = 1 and g = 0 then g := 1 endif").unwrap();
    let y = parse_rule("if g = 1 and h = 0 then h := 1 endif").unwrap();
    let program = Program::new(
        vocab.clone(),
        [("X".to_string(), x), ("Y".to_string(), y.clone())].into(),
    )
    .unwrap();
    let initial = state(&vocab, &[("f", 0), ("g", 0), ("h", 0)]);
    let horizon = &t + &d + int(10);
    let ext = [(Location::nullary("f"), step(&horizon, &t, 0, 1))].into();
    let timing = [("Y".to_string(), AgentTiming::Delayed(d.clone()))].into();
    let run = simulate(&program, &initial, &ext, horizon, &timing).unwrap();
    prop_assert!(!enabled(&run.state_at(&t, Side::At).unwrap(), &y).unwrap());
    prop_assert!(enabled(&run.state_at(&t, Side::Plus).unwrap(), &y).unwrap());
    let h = run.trajectory(&Location::nullary("h")).unwrap();
    let fired: Vec<Rational> = h.right_changes().map(|b| b.time.clone()).collect();
    prop_assert_eq!(fired, vec![&t + &d]);
    Ok(())
}

pub fn fuzz_index() -> impl Strategy<Value = (u64, u64)> {
    (0u64..1_000_000, 0u64..64)
}

fn small() -> std::ops::Range<i64> {
    -5..5
}

fn runner(cases: u32) -> proptest::test_runner::TestRunner {
    proptest::test_runner::TestRunner::new(ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    })
}

fn outcome<T: std::fmt::Debug>(
    r: Result<(), proptest::test_runner::TestError<T>>,
) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Runs every property for `cases` generated inputs each.
pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    vec![
        (
            "preservation",
            outcome(runner(cases).run(&fuzz_index(), |(s, i)| preservation(s, i))),
        ),
        (
            "controller is immediate and isolated",
            outcome(runner(cases).run(&fuzz_index(), |(s, i)| {
                controller_is_immediate_and_isolated(s, i)
            })),
        ),
        (
            "inconsistent update set is a no-op",
            outcome(runner(cases).run(
                &(small(), small(), small(), small(), small()),
                |(f, g, a, b, e)| inconsistent_update_set_is_a_no_op(f, g, a, b, e),
            )),
        ),
        (
            "trivial updates do not enable",
            outcome(
                runner(cases).run(&(small(), small(), small()), |(f, g, h)| {
                    trivial_updates_do_not_enable(f, g, h)
                }),
            ),
        ),
        (
            "external change then immediate reaction",
            outcome(
                runner(cases).run(&(moment(), 0i64..3, 3i64..6), |(t, old, new)| {
                    external_change_then_immediate_reaction(t, old, new)
                }),
            ),
        ),
        (
            "chained agent fires strictly later",
            outcome(runner(cases).run(&(moment(), moment()), |(t, d)| {
                chained_agent_fires_strictly_later(t, d)
            })),
        ),
    ]
}
