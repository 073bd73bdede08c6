//! Canonical trace text for crossing runs and its inverse.
//!
//! A trace lists the significant moments of a run with a snapshot of every
//! dynamic location at `t` and at `t+`. Between two listed moments the
//! state is the `t+` snapshot of the earlier one, so the listing determines
//! the run.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::checker::Verdict;
use crate::crossing::{
    self, crossing_program, dir, gate_status, initial_state, track_count, track_status, Params,
};
use crate::state::Location;
use crate::timeline::{significant_moments, Breakpoint, Run, Side, Trajectory};
use crate::value::{format_rational, parse_rational, Rational, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("malformed trace: {0}")]
    Malformed(String),
}

fn malformed(s: impl Into<String>) -> TraceError {
    TraceError::Malformed(s.into())
}

/// The dynamic locations a trace snapshots: `Dir`, `GateStatus` and the
/// per-track `Deadline` and `TrackStatus`.
pub fn snapshot_locations(tracks: usize) -> Vec<Location> {
    let mut out = vec![dir(), gate_status()];
    for i in 0..tracks {
        let x = crossing::track(i);
        out.push(crossing::deadline(&x));
        out.push(track_status(&x));
    }
    out
}

fn snapshot(run: &Run, locs: &[Location], t: &Rational, side: Side) -> Json {
    let map: serde_json::Map<String, Json> = locs
        .iter()
        .map(|l| {
            let v = run.value_at(l, t, side).unwrap_or(Value::Undef);
            (l.to_string(), Json::String(v.to_string()))
        })
        .collect();
    Json::Object(map)
}

fn verdict_json(v: &Verdict) -> Json {
    json!({
        "property": v.property,
        "status": v.status.to_string(),
        "witnesses": v.witnesses.iter().map(|w| json!({
            "span": w.span.to_string(),
            "expected": w.expected,
            "observed": w.observed,
        })).collect::<Vec<_>>(),
        "notes": v.notes,
    })
}

/// Serializes a crossing run, and optionally its verdicts. Keys are sorted
/// and rationals are in lowest terms, so equal runs give equal bytes.
pub fn emit_trace(run: &Run, verdicts: Option<&[Verdict]>) -> String {
    let fr = format_rational;
    let tracks = track_count(run.base()).unwrap_or(0);
    let locs = snapshot_locations(tracks);
    let moments: Vec<Json> = significant_moments(run)
        .into_iter()
        .map(|m| {
            json!({
                "time": fr(&m.time),
                "kind": m.kind.label(),
                "agents": m.agents.into_iter().collect::<Vec<_>>(),
                "at": snapshot(run, &locs, &m.time, Side::At),
                "plus": snapshot(run, &locs, &m.time, Side::Plus),
            })
        })
        .collect();
    let mut doc = json!({
        "horizon": fr(run.horizon()),
        "tracks": tracks,
        "marks": run.marks().iter().map(fr).collect::<Vec<_>>(),
        "moments": moments,
    });
    if let Ok(p) = Params::from_state(run.base()) {
        doc["params"] = json!({
            "dclose": fr(&p.dclose),
            "dopen": fr(&p.dopen),
            "dmin": fr(&p.dmin),
            "dmax": fr(&p.dmax),
        });
    }
    if let Some(vs) = verdicts {
        doc["verdicts"] = Json::Array(vs.iter().map(verdict_json).collect());
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("trace serializes");
    text.push('\n');
    text
}

#[derive(Debug, Deserialize)]
struct RawParams {
    dclose: String,
    dopen: String,
    dmin: String,
    dmax: String,
}

#[derive(Debug, Deserialize)]
struct RawMoment {
    time: String,
    at: BTreeMap<String, String>,
    plus: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct RawTrace {
    horizon: String,
    tracks: usize,
    params: RawParams,
    #[serde(default)]
    marks: Vec<String>,
    moments: Vec<RawMoment>,
}

fn rational(field: &str, text: &str) -> Result<Rational, TraceError> {
    parse_rational(text).map_err(|e| malformed(format!("{field}: {e}")))
}

/// Rebuilds a run from trace text. Only the snapshots, parameters, horizon
/// and marks are read; kinds, agents and verdicts are recomputed by
/// whoever checks the result.
pub fn parse_trace(text: &str) -> Result<Run, TraceError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawTrace = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        TraceError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    let params = Params::new(
        rational("params.dclose", &raw.params.dclose)?,
        rational("params.dopen", &raw.params.dopen)?,
        rational("params.dmin", &raw.params.dmin)?,
        rational("params.dmax", &raw.params.dmax)?,
    )
    .map_err(|e| malformed(e.to_string()))?;
    let horizon = rational("horizon", &raw.horizon)?;
    if raw.tracks == 0 {
        return Err(malformed("a trace needs at least one track"));
    }
    let mut base = initial_state(&params, raw.tracks).map_err(|e| malformed(e.to_string()))?;

    let locs = snapshot_locations(raw.tracks);
    let mut points: BTreeMap<Location, Vec<Breakpoint>> = BTreeMap::new();
    let mut last: Option<Rational> = None;
    for (k, m) in raw.moments.iter().enumerate() {
        let t = rational(&format!("moments[{k}].time"), &m.time)?;
        let ordered = match &last {
            None => t == Rational::from_integer(0.into()),
            Some(prev) => *prev < t && t <= horizon,
        };
        if !ordered {
            return Err(malformed(format!(
                "moments[{k}]: times must start at 0 and increase up to the horizon"
            )));
        }
        for (side, snap) in [("at", &m.at), ("plus", &m.plus)] {
            if snap.len() != locs.len() {
                return Err(malformed(format!(
                    "moments[{k}].{side}: expected {} locations, found {}",
                    locs.len(),
                    snap.len()
                )));
            }
        }
        for loc in &locs {
            let key = loc.to_string();
            let read = |side: &str, snap: &BTreeMap<String, String>| {
                let text = snap
                    .get(&key)
                    .ok_or_else(|| malformed(format!("moments[{k}].{side}: missing {key}")))?;
                Value::parse(text).map_err(|e| malformed(format!("moments[{k}].{side}.{key}: {e}")))
            };
            let bp = Breakpoint::new(t.clone(), read("at", &m.at)?, read("plus", &m.plus)?);
            points.entry(loc.clone()).or_default().push(bp);
        }
        last = Some(t);
    }
    if last.is_none() {
        return Err(malformed("a trace needs at least moment 0"));
    }

    let mut trajectories = BTreeMap::new();
    for (loc, bps) in points {
        base.assign(loc.clone(), bps[0].at.clone())
            .map_err(|e| malformed(format!("{loc}: {e}")))?;
        let traj = Trajectory::from_breakpoints(horizon.clone(), bps)
            .map_err(|e| malformed(format!("{loc}: {e}")))?;
        trajectories.insert(loc, traj);
    }
    let marks = raw
        .marks
        .iter()
        .map(|m| rational("marks", m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Run::new(crossing_program(), base, trajectories, horizon).with_marks(marks))
}
