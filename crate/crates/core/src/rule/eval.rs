use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{Guard, Rule, Term, EQ, LT, PLUS};
use crate::state::{consistent, Location, State, StateError, Update, UpdateSet, CURRENT_TIME};
use crate::value::{ExtRational, Rational, Value};

/// Values assigned to variables.
pub type Environment = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("guard `{guard}` evaluated to non-boolean {value}")]
    NonBooleanGuard { guard: String, value: Value },
    #[error("cannot enumerate universe `{0}`")]
    InfiniteUniverse(String),
}

fn number<'a>(op: &str, v: &'a Value) -> Result<&'a ExtRational, EvalError> {
    v.as_number()
        .ok_or_else(|| EvalError::TypeError(format!("`{op}` applied to {v}")))
}

pub fn eval_term(s: &State, env: &Environment, e: &Term) -> Result<Value, EvalError> {
    match e {
        Term::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(v.clone())),
        Term::Lit(v) => Ok(v.clone()),
        Term::App(name, args) if Term::is_builtin(name, args) => {
            let a = eval_term(s, env, &args[0])?;
            let b = eval_term(s, env, &args[1])?;
            match name.as_str() {
                EQ => Ok(Value::Bool(a == b)),
                LT => Ok(Value::Bool(number(LT, &a)? < number(LT, &b)?)),
                _ => Ok(Value::Number(number(PLUS, &a)? + number(PLUS, &b)?)),
            }
        }
        Term::App(name, args) => {
            let args = args
                .iter()
                .map(|a| eval_term(s, env, a))
                .collect::<Result<Vec<_>, _>>()?;
            if !s.vocabulary().contains(name) && args.len() == 1 {
                // Universe symbols double as membership predicates.
                if let Some(u) = s.universes().get(name) {
                    return Ok(Value::Bool(u.contains(&args[0])));
                }
            }
            Ok(s.read(&Location::new(name.clone(), args))?)
        }
    }
}

fn finite_universe<'a>(s: &'a State, name: &str) -> Result<&'a [Value], EvalError> {
    s.universe(name)?
        .elements()
        .ok_or_else(|| EvalError::InfiniteUniverse(name.to_string()))
}

fn bind(env: &Environment, var: &str, v: &Value) -> Environment {
    let mut env = env.clone();
    env.insert(var.to_string(), v.clone());
    env
}

pub fn eval_guard(s: &State, env: &Environment, g: &Guard) -> Result<bool, EvalError> {
    match g {
        Guard::Term(t) => match eval_term(s, env, t)? {
            Value::Bool(b) => Ok(b),
            value => Err(EvalError::NonBooleanGuard {
                guard: t.to_string(),
                value,
            }),
        },
        Guard::Not(g) => Ok(!eval_guard(s, env, g)?),
        Guard::And(a, b) => Ok(eval_guard(s, env, a)? && eval_guard(s, env, b)?),
        Guard::Or(a, b) => Ok(eval_guard(s, env, a)? || eval_guard(s, env, b)?),
        Guard::Forall {
            var,
            universe,
            body,
        } => {
            for elem in finite_universe(s, universe)? {
                if !eval_guard(s, &bind(env, var, elem), body)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

pub fn collect_updates(s: &State, env: &Environment, r: &Rule) -> Result<UpdateSet, EvalError> {
    let mut out = UpdateSet::new();
    collect_into(s, env, r, &mut out)?;
    Ok(out)
}

fn collect_into(
    s: &State,
    env: &Environment,
    r: &Rule,
    out: &mut UpdateSet,
) -> Result<(), EvalError> {
    match r {
        Rule::Update { head, args, rhs } => {
            let args = args
                .iter()
                .map(|a| eval_term(s, env, a))
                .collect::<Result<Vec<_>, _>>()?;
            let value = eval_term(s, env, rhs)?;
            out.insert(Update::new(Location::new(head.clone(), args), value));
        }
        Rule::Cond {
            guard,
            then_branch,
            else_branch,
        } => {
            if eval_guard(s, env, guard)? {
                collect_into(s, env, then_branch, out)?;
            } else if let Some(e) = else_branch {
                collect_into(s, env, e, out)?;
            }
        }
        Rule::Block(rules) => {
            for r in rules {
                collect_into(s, env, r, out)?;
            }
        }
        Rule::VarRange {
            var,
            universe,
            body,
        } => {
            for elem in finite_universe(s, universe)? {
                collect_into(s, &bind(env, var, elem), body, out)?;
            }
        }
    }
    Ok(())
}

/// Consistent and containing at least one non-trivial update.
pub fn enabled(s: &State, r: &Rule) -> Result<bool, EvalError> {
    let us = collect_updates(s, &Environment::new(), r)?;
    Ok(consistent(&us) && !s.nontrivial(&us)?.is_empty())
}

// ---------------------------------------------------------------------------
// Time-critical moments

/// A term's value as a function of `CT` while every other location is frozen.
enum Affine {
    Const(Value),
    Linear { slope: BigInt, offset: Rational },
}

fn affine(s: &State, env: &Environment, e: &Term) -> Result<Affine, EvalError> {
    if !e.mentions_time() {
        return Ok(Affine::Const(eval_term(s, env, e)?));
    }
    match e {
        Term::App(name, args) if name == CURRENT_TIME && args.is_empty() => Ok(Affine::Linear {
            slope: BigInt::one(),
            offset: Rational::zero(),
        }),
        Term::App(name, args) if name == PLUS && args.len() == 2 => {
            let a = affine(s, env, &args[0])?;
            let b = affine(s, env, &args[1])?;
            add_affine(a, b)
        }
        other => Err(EvalError::TypeError(format!(
            "`{other}` is not affine in {CURRENT_TIME}"
        ))),
    }
}

fn add_affine(a: Affine, b: Affine) -> Result<Affine, EvalError> {
    use Affine::*;
    let finite = |v: &Value| -> Result<Option<Rational>, EvalError> {
        match number(PLUS, v)? {
            ExtRational::Finite(r) => Ok(Some(r.clone())),
            ExtRational::Infinity => Ok(None),
        }
    };
    Ok(match (a, b) {
        (Const(x), Const(y)) => Const(Value::Number(number(PLUS, &x)? + number(PLUS, &y)?)),
        (Linear { slope, offset }, Const(c)) | (Const(c), Linear { slope, offset }) => {
            match finite(&c)? {
                Some(c) => Linear {
                    slope,
                    offset: offset + c,
                },
                None => Const(Value::infinity()),
            }
        }
        (
            Linear {
                slope: s1,
                offset: o1,
            },
            Linear {
                slope: s2,
                offset: o2,
            },
        ) => {
            let slope = s1 + s2;
            if slope.is_zero() {
                Const(Value::number(o1 + o2))
            } else {
                Linear {
                    slope,
                    offset: o1 + o2,
                }
            }
        }
    })
}

/// The value of `CT` at which two affine terms coincide, if any.
fn crossing_point(a: &Affine, b: &Affine) -> Option<Rational> {
    use Affine::*;
    let line_meets = |slope: &BigInt, offset: &Rational, c: &Value| {
        c.as_finite()
            .map(|c| (c - offset) / Rational::from_integer(slope.clone()))
    };
    match (a, b) {
        (Const(_), Const(_)) => None,
        (Linear { slope, offset }, Const(c)) | (Const(c), Linear { slope, offset }) => {
            line_meets(slope, offset, c)
        }
        (
            Linear {
                slope: s1,
                offset: o1,
            },
            Linear {
                slope: s2,
                offset: o2,
            },
        ) => {
            let ds = s1 - s2;
            (!ds.is_zero()).then(|| (o2 - o1) / Rational::from_integer(ds))
        }
    }
}

/// Moments at which some `CT`-dependent comparison in `r` can change its
/// truth value, assuming every location other than `CT` keeps its value
/// in `s`. Update right-hand sides are compared against the current
/// content of their location, since that decides triviality.
pub fn critical_times(s: &State, env: &Environment, r: &Rule) -> Result<Vec<Rational>, EvalError> {
    let mut out = Vec::new();
    rule_critical(s, env, r, &mut out)?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn term_critical(
    s: &State,
    env: &Environment,
    t: &Term,
    out: &mut Vec<Rational>,
) -> Result<(), EvalError> {
    if !t.mentions_time() {
        return Ok(());
    }
    if let Term::App(name, args) = t {
        if args.len() == 2 && (name == EQ || name == LT) {
            let a = affine(s, env, &args[0])?;
            let b = affine(s, env, &args[1])?;
            out.extend(crossing_point(&a, &b));
        }
        for a in args {
            term_critical(s, env, a, out)?;
        }
    }
    Ok(())
}

fn guard_critical(
    s: &State,
    env: &Environment,
    g: &Guard,
    out: &mut Vec<Rational>,
) -> Result<(), EvalError> {
    match g {
        Guard::Term(t) => term_critical(s, env, t, out),
        Guard::Not(g) => guard_critical(s, env, g, out),
        Guard::And(a, b) | Guard::Or(a, b) => {
            guard_critical(s, env, a, out)?;
            guard_critical(s, env, b, out)
        }
        Guard::Forall {
            var,
            universe,
            body,
        } => {
            for elem in finite_universe(s, universe)? {
                guard_critical(s, &bind(env, var, elem), body, out)?;
            }
            Ok(())
        }
    }
}

fn rule_critical(
    s: &State,
    env: &Environment,
    r: &Rule,
    out: &mut Vec<Rational>,
) -> Result<(), EvalError> {
    match r {
        Rule::Update { head, args, rhs } => {
            for a in args {
                term_critical(s, env, a, out)?;
            }
            term_critical(s, env, rhs, out)?;
            if rhs.mentions_time() {
                let args = args
                    .iter()
                    .map(|a| eval_term(s, env, a))
                    .collect::<Result<Vec<_>, _>>()?;
                let current = s.read(&Location::new(head.clone(), args))?;
                if current.as_number().is_some() {
                    out.extend(crossing_point(
                        &affine(s, env, rhs)?,
                        &Affine::Const(current),
                    ));
                }
            }
            Ok(())
        }
        Rule::Cond {
            guard,
            then_branch,
            else_branch,
        } => {
            guard_critical(s, env, guard, out)?;
            rule_critical(s, env, then_branch, out)?;
            match else_branch {
                Some(e) => rule_critical(s, env, e, out),
                None => Ok(()),
            }
        }
        Rule::Block(rules) => {
            for r in rules {
                rule_critical(s, env, r, out)?;
            }
            Ok(())
        }
        Rule::VarRange {
            var,
            universe,
            body,
        } => {
            for elem in finite_universe(s, universe)? {
                rule_critical(s, &bind(env, var, elem), body, out)?;
            }
            Ok(())
        }
    }
}
