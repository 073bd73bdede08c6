//! Values of the superuniverse: booleans, `undef`, named atoms and extended
//! rationals. Time instants are plain [`Rational`]s.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

/// Exact arbitrary-precision rational; always kept in lowest terms.
pub type Rational = BigRational;

/// Builds the rational `numer / denom`.
///
/// Panics if `denom` is zero.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Builds an integral rational.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Same order as `a.cmp(b)`, by cross-multiplication. `Ratio`'s own `Ord`
/// goes through repeated floor division, which dominates lookups in long
/// trajectories.
pub fn cmp_rational(a: &Rational, b: &Rational) -> std::cmp::Ordering {
    if a.denom() == b.denom() {
        a.numer().cmp(b.numer())
    } else {
        (a.numer() * b.denom()).cmp(&(b.numer() * a.denom()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal {literal:?}")]
pub struct ParseRationalError {
    pub literal: String,
}

/// Parses `"13"`, `"-2"`, `"13.5"` or `"27/2"`.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError {
        literal: text.to_string(),
    };
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    let value = if let Some((p, q)) = body.split_once('/') {
        if !digits(p) || !digits(q) {
            return Err(err());
        }
        let q: BigInt = q.parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        Rational::new(p.parse().map_err(|_| err())?, q)
    } else if let Some((whole, frac)) = body.split_once('.') {
        if !digits(whole) || !digits(frac) {
            return Err(err());
        }
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let numer: BigInt = format!("{whole}{frac}").parse().map_err(|_| err())?;
        Rational::new(numer, scale)
    } else {
        if !digits(body) {
            return Err(err());
        }
        Rational::from_integer(body.parse().map_err(|_| err())?)
    };
    Ok(if negative { -value } else { value })
}

/// Canonical text of a rational: `"p"` for integers, otherwise `"p/q"`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A rational number or `∞`, which is larger than every rational.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtRational {
    Finite(Rational),
    Infinity,
}

impl ExtRational {
    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRational::Finite(r) => Some(r),
            ExtRational::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinity)
    }
}

impl From<Rational> for ExtRational {
    fn from(r: Rational) -> Self {
        ExtRational::Finite(r)
    }
}

impl Add for &ExtRational {
    type Output = ExtRational;

    fn add(self, rhs: Self) -> ExtRational {
        match (self, rhs) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a + b),
            _ => ExtRational::Infinity,
        }
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Finite(r) => f.write_str(&format_rational(r)),
            ExtRational::Infinity => f.write_str("infinity"),
        }
    }
}

impl FromStr for ExtRational {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "infinity" {
            Ok(ExtRational::Infinity)
        } else {
            parse_rational(s).map(ExtRational::Finite)
        }
    }
}

/// An element of the superuniverse.
///
/// Equality is structural; because rationals are normalized this coincides
/// with numeric equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Undef,
    Atom(String),
    Number(ExtRational),
}

impl Value {
    pub fn atom(name: impl Into<String>) -> Self {
        Value::Atom(name.into())
    }

    pub fn number(r: Rational) -> Self {
        Value::Number(ExtRational::Finite(r))
    }

    pub fn infinity() -> Self {
        Value::Number(ExtRational::Infinity)
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<&ExtRational> {
        match self {
            Value::Number(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        self.as_number().and_then(ExtRational::finite)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Value::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Parses the canonical text produced by `Display`. Identifiers that are
    /// not keywords become atoms.
    pub fn parse(text: &str) -> Result<Self, ParseRationalError> {
        match text {
            "true" => return Ok(Value::Bool(true)),
            "false" => return Ok(Value::Bool(false)),
            "undef" => return Ok(Value::Undef),
            "infinity" => return Ok(Value::infinity()),
            _ => {}
        }
        let first = text.chars().next();
        match first {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                if text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    Ok(Value::atom(text))
                } else {
                    Err(ParseRationalError {
                        literal: text.to_string(),
                    })
                }
            }
            _ => parse_rational(text).map(Value::number),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<Rational> for Value {
    fn from(r: Rational) -> Self {
        Value::number(r)
    }
}

impl From<ExtRational> for Value {
    fn from(r: ExtRational) -> Self {
        Value::Number(r)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Undef => f.write_str("undef"),
            Value::Atom(a) => f.write_str(a),
            Value::Number(n) => write!(f, "{n}"),
        }
    }
}

/// Midpoint of two rationals.
pub fn midpoint(a: &Rational, b: &Rational) -> Rational {
    (a + b) / int(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_and_ratio_forms() {
        assert_eq!(parse_rational("13.5").unwrap(), rat(27, 2));
        assert_eq!(parse_rational("27/2").unwrap(), rat(27, 2));
        assert_eq!(parse_rational("54/4").unwrap(), rat(27, 2));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert_eq!(parse_rational("0.25").unwrap(), rat(1, 4));
    }

    #[test]
    fn rejects_malformed_rationals() {
        for bad in [
            "1.2.3", "", "1/0", "a", "1/", "/2", ".5", "1e3", "--1", "1/-2",
        ] {
            assert!(parse_rational(bad).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn infinity_exceeds_every_rational() {
        let big = ExtRational::Finite(int(i64::MAX) * int(i64::MAX));
        assert!(ExtRational::Infinity > big);
        assert!(ExtRational::Finite(int(-5)) < ExtRational::Finite(int(3)));
    }

    #[test]
    fn booleans_and_undef_are_distinct() {
        let vals = [Value::Bool(true), Value::Bool(false), Value::Undef];
        for (i, a) in vals.iter().enumerate() {
            for (j, b) in vals.iter().enumerate() {
                assert_eq!(i == j, a == b);
            }
        }
    }

    #[test]
    fn canonical_text_round_trips() {
        for v in [
            Value::number(rat(27, 2)),
            Value::number(int(-4)),
            Value::infinity(),
            Value::atom("inCrossing"),
            Value::Bool(false),
            Value::Undef,
        ] {
            assert_eq!(Value::parse(&v.to_string()).unwrap(), v);
        }
        assert_eq!(format_rational(&rat(6, 4)), "3/2");
    }
}
