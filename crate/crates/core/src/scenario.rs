//! Scenario files: parameters, horizon, train pattern and gate delays.
//!
//! Every rational is a string, either decimal (`"13.5"`) or a ratio
//! (`"27/2"`), so nothing passes through floating point.

use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::builder::{build_controller_run, build_run, check_delays, BuildError, DelayPolicy};
use crate::crossing::{validate_pattern, CrossingError, Params, Train, TrainPattern};
use crate::timeline::Run;
use crate::value::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario, {clause}: {detail}")]
    Validation { clause: String, detail: String },
}

impl ScenarioError {
    fn invalid(clause: impl Into<String>, detail: impl Into<String>) -> Self {
        ScenarioError::Validation {
            clause: clause.into(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub params: Params,
    pub horizon: Rational,
    pub pattern: TrainPattern,
    pub gate_delays: DelayPolicy,
}

impl Scenario {
    pub fn build(&self) -> Result<(Run, Vec<Rational>), BuildError> {
        build_run(
            &self.pattern,
            &self.params,
            &self.horizon,
            &self.gate_delays,
        )
    }

    /// Canonical JSON text: fixed key order, rationals in lowest terms.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawScenario::from(self)).expect("scenario serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Rat(Rational);

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational as a string, like \"13.5\" or \"27/2\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
                parse_rational(v).map(Rat).map_err(E::custom)
            }
        }
        d.deserialize_str(V)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    dclose: Rat,
    dopen: Rat,
    dmin: Rat,
    dmax: Rat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RawDelays {
    Auto,
    Seed(u64),
    List(Vec<Rat>),
}

impl Serialize for RawDelays {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            RawDelays::Auto => s.serialize_str("auto"),
            RawDelays::Seed(n) => s.serialize_str(&format!("seed:{n}")),
            RawDelays::List(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for RawDelays {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> de::Visitor<'de> for V {
            type Value = RawDelays;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"auto\", \"seed:N\" or a list of rational strings")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<RawDelays, E> {
                if v == "auto" {
                    return Ok(RawDelays::Auto);
                }
                v.strip_prefix("seed:")
                    .and_then(|n| n.parse().ok())
                    .map(RawDelays::Seed)
                    .ok_or_else(|| E::invalid_value(de::Unexpected::Str(v), &self))
            }
            fn visit_seq<A: de::SeqAccess<'de>>(self, seq: A) -> Result<RawDelays, A::Error> {
                Vec::<Rat>::deserialize(de::value::SeqAccessDeserializer::new(seq))
                    .map(RawDelays::List)
            }
        }
        d.deserialize_any(V)
    }
}

fn auto() -> RawDelays {
    RawDelays::Auto
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    params: RawParams,
    horizon: Rat,
    tracks: Vec<Vec<[Rat; 3]>>,
    #[serde(default = "auto")]
    gate_delays: RawDelays,
}

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        let p = &s.params;
        RawScenario {
            params: RawParams {
                dclose: Rat(p.dclose.clone()),
                dopen: Rat(p.dopen.clone()),
                dmin: Rat(p.dmin.clone()),
                dmax: Rat(p.dmax.clone()),
            },
            horizon: Rat(s.horizon.clone()),
            tracks: s
                .pattern
                .tracks
                .iter()
                .map(|trains| {
                    trains
                        .iter()
                        .map(|t| {
                            [
                                Rat(t.detect.clone()),
                                Rat(t.enter.clone()),
                                Rat(t.exit.clone()),
                            ]
                        })
                        .collect()
                })
                .collect(),
            gate_delays: match &s.gate_delays {
                DelayPolicy::Auto => RawDelays::Auto,
                DelayPolicy::Seeded(n) => RawDelays::Seed(*n),
                DelayPolicy::Explicit(v) => RawDelays::List(v.iter().cloned().map(Rat).collect()),
            },
        }
    }
}

/// Parses and validates a scenario: parameter ordering, the train pattern,
/// the horizon, and explicit delays against their bounds.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, ScenarioError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let raw: RawScenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;

    let p = raw.params;
    let params = Params::new(p.dclose.0, p.dopen.0, p.dmin.0, p.dmax.0).map_err(|e| match e {
        CrossingError::BadParams(d) => ScenarioError::invalid("parameters", d),
        other => ScenarioError::invalid("parameters", other.to_string()),
    })?;
    let pattern = TrainPattern::new(
        raw.tracks
            .into_iter()
            .map(|trains| {
                trains
                    .into_iter()
                    .map(|[a, b, c]| Train::new(a.0, b.0, c.0))
                    .collect()
            })
            .collect(),
    );
    let report = validate_pattern(&pattern, &params);
    if let Some(v) = report.violations.first() {
        return Err(ScenarioError::invalid(
            format!("train motion, {}", v.clause),
            v.to_string(),
        ));
    }
    let horizon = raw.horizon.0;
    let q = build_controller_run(&pattern, &params, &horizon).map_err(|e| match e {
        BuildError::HorizonTooSmall { .. } => ScenarioError::invalid("horizon", e.to_string()),
        other => ScenarioError::invalid("controller run", other.to_string()),
    })?;
    let gate_delays = match raw.gate_delays {
        RawDelays::Auto => DelayPolicy::Auto,
        RawDelays::Seed(n) => DelayPolicy::Seeded(n),
        RawDelays::List(v) => {
            let delays: Vec<Rational> = v.into_iter().map(|r| r.0).collect();
            check_delays(&q, &delays)
                .map_err(|e| ScenarioError::invalid("gate delays", e.to_string()))?;
            DelayPolicy::Explicit(delays)
        }
    };
    Ok(Scenario {
        params,
        horizon,
        pattern,
        gate_delays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{int, rat};

    const WORKED: &str = r#"{"params":{"dclose":"1","dopen":"2","dmin":"4","dmax":"6"},
        "horizon":"40","tracks":[[["10","15","22"]]],"gate_delays":["1/2","1"]}"#;

    #[test]
    fn loads_the_worked_scenario() {
        let s = load_scenario(WORKED.as_bytes()).unwrap();
        assert_eq!(s.params, Params::from_ints(1, 2, 4, 6).unwrap());
        assert_eq!(s.horizon, int(40));
        assert_eq!(
            s.gate_delays,
            DelayPolicy::Explicit(vec![rat(1, 2), int(1)])
        );
        assert_eq!(load_scenario(s.to_json().as_bytes()).unwrap(), s);
    }

    #[test]
    fn decimal_and_ratio_agree() {
        let a = WORKED.replace(r#"["1/2","1"]"#, r#"["0.5","1.0"]"#);
        assert_eq!(
            load_scenario(a.as_bytes()).unwrap(),
            load_scenario(WORKED.as_bytes()).unwrap()
        );
    }

    #[test]
    fn short_approach_names_the_clause() {
        let bad = WORKED.replace(r#""15""#, r#""12""#);
        let e = load_scenario(bad.as_bytes()).unwrap_err();
        let ScenarioError::Validation { clause, .. } = &e else {
            panic!("{e}")
        };
        assert_eq!(clause, "train motion, approach time");
        assert!(e.to_string().contains("below dmin"), "{e}");
    }

    #[test]
    fn malformed_rational_reports_its_path() {
        let bad = WORKED.replace(r#""dmax":"6""#, r#""dmax":"1.2.3""#);
        match load_scenario(bad.as_bytes()).unwrap_err() {
            ScenarioError::Parse { path, .. } => assert_eq!(path, "params.dmax"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn delay_policies_parse() {
        let seeded = WORKED.replace(r#"["1/2","1"]"#, r#""seed:9""#);
        assert_eq!(
            load_scenario(seeded.as_bytes()).unwrap().gate_delays,
            DelayPolicy::Seeded(9)
        );
        let none = WORKED.replace(r#","gate_delays":["1/2","1"]"#, "");
        assert_eq!(
            load_scenario(none.as_bytes()).unwrap().gate_delays,
            DelayPolicy::Auto
        );
        let long = WORKED.replace(r#"["1/2","1"]"#, r#"["1","1"]"#);
        let e = load_scenario(long.as_bytes()).unwrap_err();
        assert!(
            matches!(&e, ScenarioError::Validation { clause, .. } if clause == "gate delays"),
            "{e}"
        );
    }

    #[test]
    fn short_horizon_is_rejected() {
        let bad = WORKED.replace(r#""40""#, r#""30""#);
        let e = load_scenario(bad.as_bytes()).unwrap_err();
        assert!(
            matches!(&e, ScenarioError::Validation { clause, .. } if clause == "horizon"),
            "{e}"
        );
    }
}
