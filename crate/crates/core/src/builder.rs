//! Construction of regular runs from train patterns, in two phases: first
//! the controller alone, then the gate with chosen response delays.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::crossing::{
    self, controller_initial_state, controller_program, crossing_program, dir, gate_status,
    initial_state, pattern_of, validate_pattern, CrossingError, Params, PatternReport, Regime,
    TrainPattern, CLOSED, CONTROLLER, OPENED,
};
use crate::rule::{collect_updates, Environment, EvalError};
use crate::state::{consistent, Location};
use crate::timeline::{Breakpoint, Run, Side, TimelineError, Trajectory};
use crate::value::{format_rational, int, Rational, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("invalid train pattern: {0}")]
    InvalidPattern(PatternReport),
    #[error("horizon {} is too small; it must exceed {}", format_rational(.horizon), format_rational(.required))]
    HorizonTooSmall {
        horizon: Rational,
        required: Rational,
    },
    #[error("bad gate delays: {0}")]
    BadDelays(String),
    #[error("controller update set is inconsistent at {}", format_rational(.0))]
    Inconsistent(Rational),
    #[error("run is not regular: {0}")]
    NotRegular(String),
    #[error(transparent)]
    Crossing(#[from] CrossingError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A run of the controller alone: `Dir`, `Deadline` and `TrackStatus`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerRun {
    run: Run,
    params: Params,
    pattern: TrainPattern,
}

impl ControllerRun {
    pub fn run(&self) -> &Run {
        &self.run
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn pattern(&self) -> &TrainPattern {
        &self.pattern
    }

    /// Moments at which `Dir` changes between `t` and `t+`. Odd positions
    /// (counting from 1) close, even positions open.
    pub fn dir_changes(&self) -> Vec<Rational> {
        dir_changes(&self.run)
    }
}

pub fn dir_changes(run: &Run) -> Vec<Rational> {
    run.trajectory(&dir())
        .map(|t| t.right_changes().map(|b| b.time.clone()).collect())
        .unwrap_or_default()
}

/// The smallest horizon accepted for `pattern` is anything above this.
pub fn minimum_horizon(pattern: &TrainPattern, params: &Params) -> Rational {
    pattern.last_moment() + &params.dmax + &params.dopen
}

/// The unique controller run for `pattern`. Internal locations can only
/// change at pattern moments and at detections plus `WaitTime`, so the
/// controller is executed at exactly those moments.
pub fn build_controller_run(
    pattern: &TrainPattern,
    params: &Params,
    horizon: &Rational,
) -> Result<ControllerRun, BuildError> {
    params.validate()?;
    let report = validate_pattern(pattern, params);
    if !report.is_ok() {
        return Err(BuildError::InvalidPattern(report));
    }
    let required = minimum_horizon(pattern, params);
    if *horizon <= required {
        return Err(BuildError::HorizonTooSmall {
            horizon: horizon.clone(),
            required,
        });
    }

    let program = controller_program();
    let controller = program.module(CONTROLLER).expect("controller module");
    let initial = controller_initial_state(params, pattern.track_count())?;
    let statuses = pattern.status_trajectories(horizon)?;

    let wait = params.wait_time();
    let mut moments: BTreeSet<Rational> = pattern.moments().into_iter().collect();
    moments.insert(int(0));
    for tr in pattern.tracks.iter().flatten() {
        moments.insert(&tr.detect + &wait);
    }

    let mut internal = vec![dir()];
    internal.extend((0..pattern.track_count()).map(|i| crossing::deadline(&crossing::track(i))));
    let mut history: BTreeMap<Location, Vec<Breakpoint>> = BTreeMap::new();
    for loc in &internal {
        let v = initial.read(loc).map_err(EvalError::from)?;
        history.insert(loc.clone(), vec![Breakpoint::new(int(0), v.clone(), v)]);
    }

    let env = Environment::new();
    let mut cur = initial.clone();
    for t in moments.iter().filter(|t| *t <= horizon) {
        for (loc, traj) in &statuses {
            cur.assign(loc.clone(), traj.value_at(t, Side::At)?)
                .map_err(EvalError::from)?;
        }
        let s = cur.at_time(t);
        let us = collect_updates(&s, &env, controller)?;
        if !consistent(&us) {
            return Err(BuildError::Inconsistent(t.clone()));
        }
        for u in s.nontrivial(&us).map_err(EvalError::from)? {
            let old = cur.read(&u.location).map_err(EvalError::from)?;
            history
                .get_mut(&u.location)
                .expect("controller writes only Dir and Deadline")
                .push(Breakpoint::new(t.clone(), old, u.value.clone()));
            cur.assign(u.location, u.value).map_err(EvalError::from)?;
        }
    }

    let mut trajectories = statuses;
    for (loc, bps) in history {
        trajectories.insert(loc, Trajectory::from_breakpoints(horizon.clone(), bps)?);
    }
    Ok(ControllerRun {
        run: Run::new(program, initial, trajectories, horizon.clone()),
        params: params.clone(),
        pattern: pattern.clone(),
    })
}

/// Upper bound on the `i`-th delay (0-based): `dclose` after a close
/// signal, `dopen` after an open signal.
pub fn delay_bound(params: &Params, i: usize) -> &Rational {
    if i.is_multiple_of(2) {
        &params.dclose
    } else {
        &params.dopen
    }
}

fn gap(gammas: &[Rational], i: usize, horizon: &Rational) -> Rational {
    gammas.get(i + 1).unwrap_or(horizon) - &gammas[i]
}

pub fn check_delays(q: &ControllerRun, delays: &[Rational]) -> Result<(), BuildError> {
    let gammas = q.dir_changes();
    let params = q.params();
    if delays.len() != gammas.len() {
        return Err(BuildError::BadDelays(format!(
            "{} delays given for {} direction changes",
            delays.len(),
            gammas.len()
        )));
    }
    let zero = int(0);
    for (i, a) in delays.iter().enumerate() {
        let fr = format_rational;
        let n = i + 1;
        if *a <= zero {
            return Err(BuildError::BadDelays(format!(
                "a{n} = {} must be positive",
                fr(a)
            )));
        }
        let (bound, name) = if i % 2 == 0 {
            (&params.dclose, "dclose")
        } else {
            (&params.dopen, "dopen")
        };
        if a >= bound {
            let parity = if i % 2 == 0 { "odd" } else { "even" };
            return Err(BuildError::BadDelays(format!(
                "a{n} = {} must be below {name} = {} for {parity} positions",
                fr(a),
                fr(bound)
            )));
        }
        if params.regime() == Regime::Wide && i + 1 < gammas.len() {
            let g = gap(&gammas, i, q.run().horizon());
            if *a >= g {
                return Err(BuildError::BadDelays(format!(
                    "a{n} = {} must be below the gap {} to the next direction change",
                    fr(a),
                    fr(&g)
                )));
            }
        }
    }
    Ok(())
}

/// Adds the gate to `q`: after the `i`-th direction change the gate
/// responds `delays[i]` later, unless the direction changes back first.
pub fn extend_with_gate(q: &ControllerRun, delays: &[Rational]) -> Result<Run, BuildError> {
    check_delays(q, delays)?;
    let horizon = q.run().horizon().clone();
    let gammas = q.dir_changes();
    let opened = Value::atom(OPENED);
    let closed = Value::atom(CLOSED);

    let mut bps = vec![Breakpoint::new(int(0), opened.clone(), opened.clone())];
    let mut marks = Vec::new();
    let mut status = opened.clone();
    let mut marked = false;
    for (i, g) in gammas.iter().enumerate() {
        let a = &delays[i];
        let span = gap(&gammas, i, &horizon);
        if i % 2 == 0 {
            if status == opened || marked {
                if marked {
                    bps.push(Breakpoint::new(g.clone(), closed.clone(), opened.clone()));
                }
                bps.push(Breakpoint::new(g + a, opened.clone(), closed.clone()));
            }
            status = closed.clone();
            marked = false;
        } else {
            assert_eq!(
                status, closed,
                "gate closed whenever the direction turns open"
            );
            if *a < span {
                bps.push(Breakpoint::new(g + a, closed.clone(), opened.clone()));
                status = opened.clone();
            } else if *a == span {
                marks.push(gammas[i + 1].clone());
                marked = true;
            }
        }
    }

    let mut run = Run::new(
        crossing_program(),
        initial_state(q.params(), q.pattern().track_count())?,
        q.run().trajectories().clone(),
        horizon.clone(),
    )
    .with_marks(marks);
    run.insert_trajectory(gate_status(), Trajectory::from_breakpoints(horizon, bps)?);
    Ok(run)
}

/// How gate delays are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelayPolicy {
    Explicit(Vec<Rational>),
    /// Uniform over the admissible range, from a seeded stream.
    Seeded(u64),
    /// Half the bound.
    Auto,
}

pub fn choose_delays(q: &ControllerRun, policy: &DelayPolicy) -> Vec<Rational> {
    let gammas = q.dir_changes();
    let params = q.params();
    let horizon = q.run().horizon();
    match policy {
        DelayPolicy::Explicit(d) => d.clone(),
        DelayPolicy::Auto => (0..gammas.len())
            .map(|i| delay_bound(params, i) / int(2))
            .collect(),
        DelayPolicy::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            sample_delays(&mut rng, params, &gammas, horizon)
        }
    }
}

/// Draws one admissible delay per direction change. In the narrow regime
/// the delay after an open signal sometimes equals the gap exactly, so the
/// marked case is exercised.
pub fn sample_delays(
    rng: &mut impl Rng,
    params: &Params,
    gammas: &[Rational],
    horizon: &Rational,
) -> Vec<Rational> {
    (0..gammas.len())
        .map(|i| {
            let bound = delay_bound(params, i).clone();
            let g = gap(gammas, i, horizon);
            let frac = Rational::new(rng.gen_range(1..1000).into(), 1000.into());
            match params.regime() {
                Regime::Wide => bound.min(g) * frac,
                Regime::Narrow if i % 2 == 1 && g < bound && rng.gen_ratio(1, 4) => g,
                Regime::Narrow => bound * frac,
            }
        })
        .collect()
}

pub fn build_run(
    pattern: &TrainPattern,
    params: &Params,
    horizon: &Rational,
    policy: &DelayPolicy,
) -> Result<(Run, Vec<Rational>), BuildError> {
    let q = build_controller_run(pattern, params, horizon)?;
    let delays = choose_delays(&q, policy);
    Ok((extend_with_gate(&q, &delays)?, delays))
}

/// First location at which two runs differ, if any. Locations without a
/// trajectory read as their base value.
pub fn run_difference(a: &Run, b: &Run) -> Option<String> {
    if a.horizon() != b.horizon() {
        return Some("horizons differ".into());
    }
    let locs: BTreeSet<&Location> = a
        .trajectories()
        .keys()
        .chain(b.trajectories().keys())
        .collect();
    for loc in locs {
        let traj = |r: &Run| match r.trajectory(loc) {
            Some(t) => Some(t.clone()),
            None => r
                .base()
                .read(loc)
                .ok()
                .map(|v| Trajectory::constant(r.horizon().clone(), v)),
        };
        if traj(a) != traj(b) {
            return Some(format!("{loc} differs"));
        }
    }
    None
}

/// Delays under which the construction reproduces `r` exactly.
pub fn recover_delays(r: &Run) -> Result<Vec<Rational>, BuildError> {
    let not_regular = |m: String| BuildError::NotRegular(m);
    let params = Params::from_state(r.base())?;
    let pattern = pattern_of(r).map_err(|e| not_regular(e.to_string()))?;
    let horizon = r.horizon().clone();
    let q = build_controller_run(&pattern, &params, &horizon)
        .map_err(|e| not_regular(e.to_string()))?;
    let gammas = q.dir_changes();
    let gs = r
        .trajectory(&gate_status())
        .ok_or_else(|| not_regular("GateStatus has no trajectory".into()))?;
    let opened = Value::atom(OPENED);
    let closed = Value::atom(CLOSED);
    let changes: Vec<&Breakpoint> = gs.right_changes().collect();

    let mut delays = Vec::with_capacity(gammas.len());
    for (i, g) in gammas.iter().enumerate() {
        let end = gammas.get(i + 1).unwrap_or(&horizon);
        let span = end - g;
        let at = gs.value_at(g, Side::At)?;
        if i % 2 == 0 {
            let fires_here = at == closed && gs.value_at(g, Side::Plus)? == opened;
            if at == opened || fires_here {
                let delta = changes
                    .iter()
                    .find(|b| b.time > *g && b.time <= *end && b.right == closed)
                    .ok_or_else(|| {
                        not_regular(format!(
                            "gate does not close after the close signal at {}",
                            format_rational(g)
                        ))
                    })?;
                delays.push(&delta.time - g);
            } else {
                delays.push(&params.dclose / int(2));
            }
        } else {
            match changes.iter().find(|b| b.time > *g && b.time <= *end) {
                Some(delta) => delays.push(&delta.time - g),
                None if span < params.dopen => delays.push((&span + &params.dopen) / int(2)),
                None => {
                    return Err(not_regular(format!(
                        "gate stays closed for dopen after the open signal at {}",
                        format_rational(g)
                    )))
                }
            }
        }
    }

    let rebuilt = extend_with_gate(&q, &delays).map_err(|e| not_regular(e.to_string()))?;
    match run_difference(&rebuilt, r) {
        None => Ok(delays),
        Some(d) => Err(not_regular(format!("no delays reproduce the run: {d}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossing::{deadline, track, Train, CLOSE, OPEN};
    use crate::timeline::{agent_timing_report, validate_run};
    use crate::value::rat;

    fn single() -> (TrainPattern, Params) {
        (
            TrainPattern::new(vec![vec![Train::from_ints(10, 15, 22)]]),
            Params::from_ints(1, 2, 4, 6).unwrap(),
        )
    }

    fn changes(run: &Run, loc: &Location) -> Vec<(Rational, Value)> {
        run.trajectory(loc)
            .unwrap()
            .right_changes()
            .map(|b| (b.time.clone(), b.right.clone()))
            .collect()
    }

    #[test]
    fn single_track_controller() {
        let (p, params) = single();
        let q = build_controller_run(&p, &params, &int(40)).unwrap();
        let dl = deadline(&track(0));
        assert_eq!(
            changes(q.run(), &dl),
            vec![
                (int(10), Value::number(int(13))),
                (int(22), Value::infinity())
            ]
        );
        assert_eq!(
            changes(q.run(), &dir()),
            vec![(int(13), Value::atom(CLOSE)), (int(22), Value::atom(OPEN))]
        );
    }

    #[test]
    fn single_track_gate() {
        let (p, params) = single();
        let q = build_controller_run(&p, &params, &int(40)).unwrap();
        let run = extend_with_gate(&q, &[rat(1, 2), int(1)]).unwrap();
        assert_eq!(
            changes(&run, &gate_status()),
            vec![
                (rat(27, 2), Value::atom(CLOSED)),
                (int(23), Value::atom(OPENED))
            ]
        );
        assert_eq!(recover_delays(&run).unwrap(), vec![rat(1, 2), int(1)]);
        let report = validate_run(&run);
        assert!(report.is_ok(), "{:?}", report.violations);
        assert!(
            agent_timing_report(&run, CONTROLLER, None)
                .unwrap()
                .immediate
        );
    }

    #[test]
    fn delay_at_the_bound_is_rejected() {
        let (p, params) = single();
        let q = build_controller_run(&p, &params, &int(40)).unwrap();
        let err = extend_with_gate(&q, &[int(1), int(1)]).unwrap_err();
        assert!(err.to_string().contains("below dclose"), "{err}");
    }

    #[test]
    fn horizon_must_leave_room() {
        let (p, params) = single();
        assert!(matches!(
            build_controller_run(&p, &params, &int(30)),
            Err(BuildError::HorizonTooSmall { .. })
        ));
    }

    #[test]
    fn empty_pattern_is_quiet() {
        let params = Params::from_ints(1, 2, 4, 6).unwrap();
        let q = build_controller_run(&TrainPattern::empty(1), &params, &int(10)).unwrap();
        assert!(q.dir_changes().is_empty());
        assert_eq!(q.run().breakpoints(), vec![int(0)]);
    }

    #[test]
    fn two_tracks_keep_the_direction_closed() {
        let params = Params::from_ints(1, 2, 4, 6).unwrap();
        let p = TrainPattern::new(vec![
            vec![Train::from_ints(10, 15, 22)],
            vec![Train::from_ints(20, 25, 30)],
        ]);
        let q = build_controller_run(&p, &params, &int(50)).unwrap();
        assert_eq!(q.dir_changes(), vec![int(13), int(30)]);
    }
}
