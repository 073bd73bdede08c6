use crate::rule::{enabled, Environment};
use crate::value::{midpoint, Rational};

use super::{Run, Side, Span, TimelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WitnessKind {
    /// Enabled here but did not fire.
    NotFired,
    /// Continuously enabled without firing for at least the bound.
    IdleInterval,
    /// Enabled at a firing moment and still enabled just after it.
    EnabledAfter,
    /// Enabled at a moment and already enabled just before it.
    EnabledBefore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingWitness {
    pub span: Span,
    pub kind: WitnessKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimingReport {
    pub agent: String,
    /// Fires at every moment it is enabled.
    pub immediate: bool,
    /// Never enabled without firing throughout an interval as long as the
    /// bound. Equals `immediate` when no bound is given.
    pub bounded: bool,
    /// Every enabled moment is isolated: disabled at `t+` and at `t−`.
    pub isolated: bool,
    pub enabled_moments: Vec<Rational>,
    pub witnesses: Vec<TimingWitness>,
}

struct Stretch {
    span: Span,
    enabled: bool,
    fires: bool,
}

/// Immediacy and boundedness of `agent`, decided exactly over the finitely
/// many candidate moments where its update set can change.
pub fn agent_timing_report(
    run: &Run,
    agent: &str,
    bound: Option<&Rational>,
) -> Result<TimingReport, TimelineError> {
    let rule = run
        .program()
        .module(agent)
        .ok_or_else(|| TimelineError::UnknownAgent(agent.to_string()))?;
    let heads = rule.heads();
    let env = Environment::new();
    let moments = run.candidate_moments(rule, &env)?;
    let horizon = run.horizon();

    let fires_at = |t: &Rational| {
        run.trajectories().iter().any(|(loc, traj)| {
            heads.contains(&loc.symbol)
                && traj.value_unchecked(t, Side::At) != traj.value_unchecked(t, Side::Plus)
        })
    };
    let enabled_at = |t: &Rational| enabled(&run.state_unchecked(t, Side::At), rule);

    let mut stretches = Vec::with_capacity(moments.len() * 2);
    for (i, m) in moments.iter().enumerate() {
        stretches.push(Stretch {
            span: Span::point(m.clone()),
            enabled: enabled_at(m)?,
            fires: fires_at(m),
        });
        let next = match moments.get(i + 1) {
            Some(n) => Some(Span::open(m.clone(), n.clone())),
            None if m < horizon => Some(Span::open_closed(m.clone(), horizon.clone())),
            None => None,
        };
        if let Some(span) = next {
            stretches.push(Stretch {
                enabled: enabled_at(&midpoint(&span.start, &span.end))?,
                fires: false,
                span,
            });
        }
    }

    let mut witnesses = Vec::new();
    let mut immediate = true;
    let mut isolated = true;
    let mut enabled_moments = Vec::new();
    for (i, s) in stretches.iter().enumerate() {
        if !s.enabled {
            continue;
        }
        if s.span.is_point() {
            enabled_moments.push(s.span.start.clone());
            if stretches.get(i + 1).is_some_and(|n| n.enabled) {
                isolated = false;
                witnesses.push(TimingWitness {
                    span: s.span.clone(),
                    kind: WitnessKind::EnabledAfter,
                });
            }
            if i > 0 && stretches[i - 1].enabled {
                isolated = false;
                witnesses.push(TimingWitness {
                    span: s.span.clone(),
                    kind: WitnessKind::EnabledBefore,
                });
            }
        }
        if !s.fires {
            immediate = false;
            witnesses.push(TimingWitness {
                span: s.span.clone(),
                kind: WitnessKind::NotFired,
            });
        }
    }

    let bounded = match bound {
        None => immediate,
        Some(b) => {
            let mut ok = true;
            let mut i = 0;
            while i < stretches.len() {
                if !(stretches[i].enabled && !stretches[i].fires) {
                    i += 1;
                    continue;
                }
                let start = stretches[i].span.start.clone();
                let mut end = stretches[i].span.end.clone();
                while i < stretches.len() && stretches[i].enabled && !stretches[i].fires {
                    end = stretches[i].span.end.clone();
                    i += 1;
                }
                if &end - &start >= *b {
                    ok = false;
                    witnesses.push(TimingWitness {
                        span: Span::open(start.clone(), start + b),
                        kind: WitnessKind::IdleInterval,
                    });
                }
            }
            ok
        }
    };

    Ok(TimingReport {
        agent: agent.to_string(),
        immediate,
        bounded,
        isolated,
        enabled_moments,
        witnesses,
    })
}
