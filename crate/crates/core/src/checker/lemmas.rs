use crate::crossing::{
    self, dir, gate_status, local_safe_guard, safe_to_open_guard, track_status, Constituent,
    Regime, Train, CLOSE, CLOSED, EMPTY, OPEN, OPENED,
};
use crate::rule::Environment;
use crate::timeline::{Breakpoint, Side, Span, Trajectory};
use crate::value::{format_rational, int, ExtRational, Rational, Value};

use super::{
    first_difference, points_signal, positive_spans, require, CheckError, Ctx, Verdict, Witness,
};
use crate::timeline::Run;

fn fr(r: &Rational) -> String {
    format_rational(r)
}

/// The nine auxiliary properties, in a fixed order.
pub fn check_lemmas(run: &Run) -> Result<Vec<Verdict>, CheckError> {
    let ctx = Ctx::new(run)?;
    Ok(vec![
        deadline(&ctx)?,
        three_rules(&ctx)?,
        local_safe_to_open(&ctx)?,
        global_safe_to_open(&ctx)?,
        dir_lemma(&ctx)?,
        signal_open(&ctx)?,
        uninterrupted_closing(&ctx),
        uninterrupted_opening(&ctx),
        dir_and_gate_status(&ctx),
    ])
}

fn expected_deadline(trains: &[Train], wait: &Rational, horizon: &Rational) -> Trajectory {
    let inf = Value::infinity();
    let mut bps = vec![Breakpoint::new(int(0), inf.clone(), inf.clone())];
    for tr in trains {
        let d = Value::number(&tr.detect + wait);
        bps.push(Breakpoint::new(tr.detect.clone(), inf.clone(), d.clone()));
        bps.push(Breakpoint::new(tr.exit.clone(), d, inf.clone()));
    }
    Trajectory::from_breakpoints(horizon.clone(), bps).expect("pattern moments are ordered")
}

/// Maximal open intervals on which a track is not in the crossing; the
/// last one ends at the horizon.
fn outside_crossing(trains: &[Train], horizon: &Rational) -> Vec<(Rational, Rational)> {
    let mut out = Vec::new();
    let mut start = int(0);
    for tr in trains {
        out.push((start, tr.enter.clone()));
        start = tr.exit.clone();
    }
    if start < *horizon {
        out.push((start, horizon.clone()));
    }
    out
}

/// `Deadline(x)` is infinite before each detection and `t1 + WaitTime`
/// until the train leaves; outside the crossing it is never below
/// `β − Dclose`.
fn deadline(ctx: &Ctx) -> Result<Verdict, CheckError> {
    let mut v = Verdict::new("deadline");
    let wait = ctx.params.wait_time();
    let dclose = ctx.params.big_dclose();
    for (i, trains) in ctx.pattern.tracks.iter().enumerate() {
        let actual = ctx.traj(&crossing::deadline(&crossing::track(i)));
        if let Some(w) = first_difference(&actual, &expected_deadline(trains, &wait, ctx.horizon()))
        {
            v.fail(w);
        }
        for (a, b) in outside_crossing(trains, ctx.horizon()) {
            let floor = ExtRational::Finite(&b - &dclose);
            let low = actual.first_violation(&Span::open(a, b.clone()), |val| {
                val.as_number().is_some_and(|n| *n >= floor)
            });
            if let Some(p) = low {
                v.fail(Witness {
                    span: p.span,
                    expected: format!(">= {}", floor),
                    observed: p.value.to_string(),
                });
            }
        }
    }
    Ok(v)
}

/// Each per-track controller rule's guard holds exactly at its moments:
/// detections, detections plus `WaitTime`, and exits.
fn three_rules(ctx: &Ctx) -> Result<Verdict, CheckError> {
    let mut v = Verdict::new("three rules");
    let wait = ctx.params.wait_time();
    for (i, trains) in ctx.pattern.tracks.iter().enumerate() {
        let env = ctx.track_env(i);
        let expected: [(Constituent, Vec<Rational>); 3] = [
            (
                Constituent::SignalDeadline,
                trains.iter().map(|t| t.detect.clone()).collect(),
            ),
            (
                Constituent::SignalClose,
                trains.iter().map(|t| &t.detect + &wait).collect(),
            ),
            (
                Constituent::ClearDeadline,
                trains.iter().map(|t| t.exit.clone()).collect(),
            ),
        ];
        for (c, moments) in expected {
            let actual = ctx.signal(&c.guard(), &env)?;
            if let Some(mut w) = first_difference(&actual, &points_signal(ctx.horizon(), &moments))
            {
                w.expected = format!("{c}({}) guard {}", crossing::track_name(i), w.expected);
                v.fail(w);
            }
        }
    }
    Ok(v)
}

fn expected_local_safe(ctx: &Ctx, trains: &[Train]) -> Trajectory {
    let wait = ctx.params.wait_time();
    let mut t = Trajectory::constant(ctx.horizon().clone(), Value::Bool(true));
    for tr in trains {
        let span = if wait > ctx.params.dopen {
            Span::closed_open(&tr.detect + &wait - &ctx.params.dopen, tr.exit.clone())
        } else {
            Span::open(tr.detect.clone(), tr.exit.clone())
        };
        t.overwrite(&span, Value::Bool(false));
    }
    t
}

/// Moments `t > 0` at which a boolean signal turns true, from `t−` to `t`.
fn becomes_true(t: &Trajectory) -> Vec<Rational> {
    t.left_changes()
        .filter(|b| b.at == Value::Bool(true))
        .map(|b| b.time.clone())
        .collect()
}

fn becomes_empty(ctx: &Ctx, t: &Rational) -> bool {
    (0..ctx.tracks()).any(|i| {
        let ts = ctx.traj(&track_status(&crossing::track(i)));
        let hit = ts
            .left_changes()
            .any(|b| b.time == *t && b.at == Value::atom(EMPTY));
        hit
    })
}

/// The per-track part of SafeToOpen has the predicted positive intervals,
/// turns true exactly at exits, and SignalClose is off on each of them.
fn local_safe_to_open(ctx: &Ctx) -> Result<Verdict, CheckError> {
    let mut v = Verdict::new("local safe-to-open");
    let shape = if ctx.params.wait_time() > ctx.params.dopen {
        "positive on [t3i, t3i+1 + WaitTime - dopen)"
    } else {
        "positive on [t3i, t3i+1]"
    };
    v.note(format!("interval shape {shape}"));
    for (i, trains) in ctx.pattern.tracks.iter().enumerate() {
        let env = ctx.track_env(i);
        let s = ctx.signal(&local_safe_guard(), &env)?;
        if let Some(w) = first_difference(&s, &expected_local_safe(ctx, trains)) {
            v.fail(w);
        }
        let exits: Vec<Rational> = trains.iter().map(|t| t.exit.clone()).collect();
        for t in becomes_true(&s) {
            if !exits.contains(&t) {
                v.fail(Witness {
                    span: Span::point(t),
                    expected: "turns true only when the track becomes empty".into(),
                    observed: "turns true".into(),
                });
            }
        }
        let sc = ctx.signal(&Constituent::SignalClose.guard(), &env)?;
        for span in positive_spans(&s) {
            let closed = Span::closed(span.start.clone(), span.end.clone());
            if let Some(mut w) = require(&sc, &closed, &Value::Bool(false)) {
                w.expected = format!("SignalClose({}) disabled", crossing::track_name(i));
                v.fail(w);
            }
            if span.end < *ctx.horizon()
                && sc.value_at(&span.end, Side::Plus)? != Value::Bool(false)
            {
                v.fail(Witness {
                    span: Span::point(span.end.clone()),
                    expected: "SignalClose disabled just after the interval".into(),
                    observed: "enabled".into(),
                });
            }
        }
    }
    Ok(v)
}

fn containing<'a>(spans: &'a [Span], t: &Rational) -> Option<&'a Span> {
    spans.iter().find(|s| s.contains(t))
}

/// SafeToOpen is left-closed, turns true only when some track becomes
/// empty, and its maximal intervals are the intersections of the per-track
/// ones.
fn global_safe_to_open(ctx: &Ctx) -> Result<Verdict, CheckError> {
    let mut v = Verdict::new("global safe-to-open");
    let s = ctx.signal(&safe_to_open_guard(), &Environment::new())?;
    for b in s.breakpoints() {
        if b.right == Value::Bool(true) && b.at != Value::Bool(true) {
            v.fail(Witness {
                span: Span::point(b.time.clone()),
                expected: "holds at t whenever it holds at t+".into(),
                observed: "false at t, true at t+".into(),
            });
        }
    }
    for t in becomes_true(&s) {
        if !becomes_empty(ctx, &t) {
            v.fail(Witness {
                span: Span::point(t),
                expected: "some track becomes empty".into(),
                observed: "no track status changes to empty".into(),
            });
        }
    }

    let closed_right = ctx.params.wait_time() <= ctx.params.dopen;
    if closed_right {
        v.note("with WaitTime <= dopen the maximal intervals are closed [a, b]");
    }
    let locals: Vec<Vec<Span>> = (0..ctx.tracks())
        .map(|i| {
            Ok(positive_spans(
                &ctx.signal(&local_safe_guard(), &ctx.track_env(i))?,
            ))
        })
        .collect::<Result<_, CheckError>>()?;
    for span in positive_spans(&s) {
        let truncated = span.end == *ctx.horizon();
        if !span.start_closed || (!truncated && span.end_closed != closed_right) {
            v.fail(Witness {
                span: span.clone(),
                expected: if closed_right { "[a, b]" } else { "[a, b)" }.into(),
                observed: span.to_string(),
            });
        }
        let mut meet = Span::closed(int(0), ctx.horizon().clone());
        for spans in &locals {
            match containing(spans, &span.start) {
                Some(l) => meet = meet.intersect(l),
                None => meet = Span::open(span.start.clone(), span.start.clone()),
            }
        }
        if meet != span {
            v.fail(Witness {
                span: span.clone(),
                expected: format!("intersection of per-track intervals {meet}"),
                observed: span.to_string(),
            });
        }
    }
    Ok(v)
}

/// Around each maximal SafeToOpen interval `[α, β)`: `Dir = close` at
/// `α > 0`, and `Dir = open` over `(α, β]` and at `β+`.
fn dir_lemma(ctx: &Ctx) -> Result<Verdict, CheckError> {
    let mut v = Verdict::new("dir");
    let s = ctx.signal(&safe_to_open_guard(), &Environment::new())?;
    let d = ctx.traj(&dir());
    let open = Value::atom(OPEN);
    for span in positive_spans(&s) {
        if span.start > int(0) {
            let at = d.value_at(&span.start, Side::At)?;
            if at != Value::atom(CLOSE) {
                v.fail(Witness {
                    span: Span::point(span.start.clone()),
                    expected: CLOSE.into(),
                    observed: at.to_string(),
                });
            }
        }
        if let Some(w) = require(
            &d,
            &Span::open_closed(span.start.clone(), span.end.clone()),
            &open,
        ) {
            v.fail(w);
        }
        if span.end < *ctx.horizon() {
            let after = d.value_at(&span.end, Side::Plus)?;
            if after != open {
                v.fail(Witness {
                    span: Span::point(span.end.clone()),
                    expected: format!("{OPEN} just after"),
                    observed: after.to_string(),
                });
            }
        }
    }
    Ok(v)
}

/// SignalOpen's guard holds exactly when SafeToOpen turns true, and each
/// such moment is one where some track becomes empty.
fn signal_open(ctx: &Ctx) -> Result<Verdict, CheckError> {
    let mut v = Verdict::new("signal open");
    let s = ctx.signal(&safe_to_open_guard(), &Environment::new())?;
    let moments = becomes_true(&s);
    let so = ctx.signal(&Constituent::SignalOpen.guard(), &Environment::new())?;
    if let Some(mut w) = first_difference(&so, &points_signal(ctx.horizon(), &moments)) {
        w.expected = format!("SignalOpen guard {}", w.expected);
        v.fail(w);
    }
    for t in moments {
        if !becomes_empty(ctx, &t) {
            v.fail(Witness {
                span: Span::point(t),
                expected: "some track becomes empty".into(),
                observed: "no track status changes to empty".into(),
            });
        }
    }
    Ok(v)
}

fn direction_signals(d: &Trajectory, to: &str) -> Vec<Rational> {
    d.right_changes()
        .filter(|b| b.right == Value::atom(to))
        .map(|b| b.time.clone())
        .collect()
}

/// After `Dir` is set to close it stays close for `dclose`.
fn uninterrupted_closing(ctx: &Ctx) -> Verdict {
    let mut v = Verdict::new("uninterrupted closing");
    let d = ctx.traj(&dir());
    for g in direction_signals(&d, CLOSE) {
        let window = Span::open(g.clone(), &g + &ctx.params.dclose);
        if let Some(w) = require(&d, &window, &Value::atom(CLOSE)) {
            v.fail(w);
        }
    }
    v
}

/// After `Dir` is set to open it stays open for `dopen`, provided
/// `WaitTime ≥ dopen`. Otherwise only the gate's behaviour across each
/// interrupted opening is checked: it may open at most once, and not
/// close.
fn uninterrupted_opening(ctx: &Ctx) -> Verdict {
    let d = ctx.traj(&dir());
    if ctx.params.regime() == Regime::Wide {
        let mut v = Verdict::new("uninterrupted opening");
        for g in direction_signals(&d, OPEN) {
            let window = Span::open(g.clone(), &g + &ctx.params.dopen);
            if let Some(w) = require(&d, &window, &Value::atom(OPEN)) {
                v.fail(w);
            }
        }
        return v;
    }
    let mut v = Verdict::skipped(
        "uninterrupted opening",
        "needs WaitTime >= dopen; checked only that interrupted openings move the gate at most once",
    );
    let gs = ctx.traj(&gate_status());
    let gammas: Vec<Rational> = d.right_changes().map(|b| b.time.clone()).collect();
    for (i, g) in gammas.iter().enumerate().skip(1).step_by(2) {
        let Some(next) = gammas.get(i + 1) else {
            continue;
        };
        if next - g >= ctx.params.dopen {
            continue;
        }
        let moves: Vec<&Breakpoint> = gs
            .right_changes()
            .filter(|b| b.time > *g && b.time <= *next)
            .collect();
        let bad = moves.len() > 1 || moves.iter().any(|b| b.right != Value::atom(OPENED));
        if bad || gs.value_unchecked(g, Side::At) != Value::atom(CLOSED) {
            v.status = super::Status::Fail;
            v.witnesses.push(Witness {
                span: Span::open_closed(g.clone(), next.clone()),
                expected: "gate closed at the open signal and opening at most once".into(),
                observed: format!("{} gate changes", moves.len()),
            });
        }
    }
    v
}

/// With `WaitTime ≥ dopen`, gate changes alternate with direction changes:
/// the i-th gate change lies strictly between the i-th and (i+1)-th
/// direction changes.
fn dir_and_gate_status(ctx: &Ctx) -> Verdict {
    const NAME: &str = "dir and gate status";
    if ctx.params.regime() != Regime::Wide {
        return Verdict::skipped(NAME, "needs WaitTime >= dopen");
    }
    let mut v = Verdict::new(NAME);
    let gammas: Vec<Rational> = ctx
        .traj(&dir())
        .right_changes()
        .map(|b| b.time.clone())
        .collect();
    let deltas: Vec<Rational> = ctx
        .traj(&gate_status())
        .right_changes()
        .map(|b| b.time.clone())
        .collect();
    let horizon = ctx.horizon();
    for (i, g) in gammas.iter().enumerate() {
        let next = gammas.get(i + 1);
        let window = match next {
            Some(n) => Span::open(g.clone(), n.clone()),
            None => Span::open_closed(g.clone(), horizon.clone()),
        };
        match deltas.get(i) {
            Some(d) if window.contains(d) => {}
            Some(d) => v.fail(Witness {
                span: window,
                expected: format!("gate change {} inside", i + 1),
                observed: format!("gate change at {}", fr(d)),
            }),
            None if next.is_none() && &(g + &ctx.params.dopen) >= horizon => v.note(format!(
                "last gate change after {} may lie past the horizon",
                fr(g)
            )),
            None => v.fail(Witness {
                span: window,
                expected: format!("gate change {} inside", i + 1),
                observed: "no gate change".into(),
            }),
        }
    }
    if deltas.len() > gammas.len() {
        v.fail(Witness {
            span: Span::point(deltas[gammas.len()].clone()),
            expected: "no further gate change".into(),
            observed: "gate changes".into(),
        });
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_run, DelayPolicy};
    use crate::crossing::{Params, TrainPattern};
    use crate::value::rat;

    fn built(params: Params, tracks: Vec<Vec<Train>>, horizon: i64) -> Run {
        build_run(
            &TrainPattern::new(tracks),
            &params,
            &int(horizon),
            &DelayPolicy::Seeded(7),
        )
        .unwrap()
        .0
    }

    fn assert_all_pass(run: &Run) {
        for v in check_lemmas(run).unwrap() {
            assert!(!v.failed(), "{v}");
        }
    }

    #[test]
    fn worked_run_satisfies_every_lemma() {
        let params = Params::from_ints(1, 2, 4, 6).unwrap();
        let run = build_run(
            &TrainPattern::new(vec![vec![Train::from_ints(10, 15, 22)]]),
            &params,
            &int(40),
            &DelayPolicy::Explicit(vec![rat(1, 2), int(1)]),
        )
        .unwrap()
        .0;
        let verdicts = check_lemmas(&run).unwrap();
        assert_eq!(verdicts.len(), 9);
        assert!(
            verdicts
                .iter()
                .all(|v| v.status == super::super::Status::Pass),
            "{verdicts:?}"
        );
    }

    #[test]
    fn narrow_regime_skips_opening_lemmas() {
        let params = Params::from_ints(1, 4, 4, 6).unwrap();
        let run = built(
            params,
            vec![
                vec![Train::from_ints(10, 15, 22), Train::from_ints(24, 29, 31)],
                vec![Train::from_ints(12, 17, 20)],
            ],
            50,
        );
        assert_all_pass(&run);
        let v = check_lemmas(&run).unwrap();
        assert!(v[2].notes[0].contains("[t3i, t3i+1]"));
        assert_eq!(v[8].status, super::super::Status::Skipped);
    }

    #[test]
    fn overlapping_tracks_in_wide_regime() {
        let params = Params::from_ints(1, 2, 4, 6).unwrap();
        let run = built(
            params,
            vec![
                vec![Train::from_ints(10, 15, 22), Train::from_ints(30, 36, 37)],
                vec![Train::from_ints(12, 16, 25)],
            ],
            60,
        );
        assert_all_pass(&run);
    }

    #[test]
    fn dir_flip_interrupts_closing() {
        let params = Params::from_ints(1, 2, 4, 6).unwrap();
        let mut run = built(params, vec![vec![Train::from_ints(10, 15, 22)]], 40);
        run.trajectory_mut(&dir())
            .unwrap()
            .overwrite(&Span::closed_open(rat(66, 5), int(14)), Value::atom(OPEN));
        let v = &check_lemmas(&run).unwrap()[6];
        assert!(v.failed());
        assert_eq!(v.first_moment(), Some(&rat(66, 5)));
    }
}
