//! Vocabularies, locations, states and update sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::value::{Rational, Value};

/// Name of the distinguished nullary current-time symbol.
pub const CURRENT_TIME: &str = "CT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolClass {
    Static,
    Internal,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionSymbol {
    pub name: String,
    pub arity: usize,
    pub is_relation: bool,
    pub class: SymbolClass,
}

impl FunctionSymbol {
    pub fn new(name: impl Into<String>, arity: usize, class: SymbolClass) -> Self {
        FunctionSymbol {
            name: name.into(),
            arity,
            is_relation: false,
            class,
        }
    }

    pub fn relation(name: impl Into<String>, arity: usize, class: SymbolClass) -> Self {
        FunctionSymbol {
            is_relation: true,
            ..FunctionSymbol::new(name, arity, class)
        }
    }
}

/// The function symbols of a program or state. `CT` is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: BTreeMap<String, FunctionSymbol>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut symbols = BTreeMap::new();
        symbols.insert(
            CURRENT_TIME.to_string(),
            FunctionSymbol::new(CURRENT_TIME, 0, SymbolClass::External),
        );
        Vocabulary { symbols }
    }

    pub fn with(mut self, symbol: FunctionSymbol) -> Self {
        self.insert(symbol);
        self
    }

    pub fn insert(&mut self, symbol: FunctionSymbol) {
        self.symbols.insert(symbol.name.clone(), symbol);
    }

    pub fn remove(&mut self, name: &str) -> Option<FunctionSymbol> {
        self.symbols.remove(name)
    }

    pub fn get(&self, name: &str) -> Option<&FunctionSymbol> {
        self.symbols.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &FunctionSymbol> {
        self.symbols.values()
    }

    pub fn class_of(&self, name: &str) -> Option<SymbolClass> {
        self.get(name).map(|s| s.class)
    }

    /// Internal and external symbols, excluding `CT`.
    pub fn dynamic_symbols(&self) -> impl Iterator<Item = &FunctionSymbol> {
        self.symbols
            .values()
            .filter(|s| s.class != SymbolClass::Static && s.name != CURRENT_TIME)
    }
}

/// A universe: either a finite, enumerable set or one of the numeric sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Universe {
    Finite(Vec<Value>),
    Reals,
    ExtendedReals,
}

impl Universe {
    pub fn contains(&self, v: &Value) -> bool {
        match self {
            Universe::Finite(elems) => elems.contains(v),
            Universe::Reals => v.as_finite().is_some(),
            Universe::ExtendedReals => v.as_number().is_some(),
        }
    }

    pub fn elements(&self) -> Option<&[Value]> {
        match self {
            Universe::Finite(elems) => Some(elems),
            _ => None,
        }
    }
}

/// A symbol paired with an argument tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub symbol: String,
    pub args: Vec<Value>,
}

impl Location {
    pub fn new(symbol: impl Into<String>, args: Vec<Value>) -> Self {
        Location {
            symbol: symbol.into(),
            args,
        }
    }

    pub fn nullary(symbol: impl Into<String>) -> Self {
        Location::new(symbol, Vec::new())
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{symbol}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("relation location {location} cannot hold non-boolean value {value}")]
    IllegalValue { location: Location, value: Value },
    #[error("unknown universe `{0}`")]
    UnknownUniverse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Update {
    pub location: Location,
    pub value: Value,
}

impl Update {
    pub fn new(location: Location, value: Value) -> Self {
        Update { location, value }
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.location, self.value)
    }
}

/// A finite set of updates. Identical pairs collapse.
pub type UpdateSet = BTreeSet<Update>;

/// False iff two members share a location but carry different values.
pub fn consistent(us: &UpdateSet) -> bool {
    // Ordered by location first, so clashes are adjacent.
    us.iter()
        .zip(us.iter().skip(1))
        .all(|(a, b)| a.location != b.location)
}

/// A finite interpretation over a vocabulary. Unmapped locations read as
/// `undef`, or `false` for relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    vocabulary: Arc<Vocabulary>,
    universes: Arc<BTreeMap<String, Universe>>,
    interp: BTreeMap<Location, Value>,
}

impl State {
    pub fn new(vocabulary: Vocabulary, universes: BTreeMap<String, Universe>) -> Self {
        State {
            vocabulary: Arc::new(vocabulary),
            universes: Arc::new(universes),
            interp: BTreeMap::new(),
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn universes(&self) -> &BTreeMap<String, Universe> {
        &self.universes
    }

    pub fn universe(&self, name: &str) -> Result<&Universe, StateError> {
        self.universes
            .get(name)
            .ok_or_else(|| StateError::UnknownUniverse(name.to_string()))
    }

    /// Stored (non-default) entries.
    pub fn entries(&self) -> impl Iterator<Item = (&Location, &Value)> {
        self.interp.iter()
    }

    fn symbol_for(&self, loc: &Location) -> Result<&FunctionSymbol, StateError> {
        let sym = self
            .vocabulary
            .get(&loc.symbol)
            .ok_or_else(|| StateError::UnknownSymbol(loc.symbol.clone()))?;
        if sym.arity != loc.args.len() {
            return Err(StateError::ArityMismatch {
                symbol: loc.symbol.clone(),
                expected: sym.arity,
                found: loc.args.len(),
            });
        }
        Ok(sym)
    }

    pub fn read(&self, loc: &Location) -> Result<Value, StateError> {
        let sym = self.symbol_for(loc)?;
        Ok(match self.interp.get(loc) {
            Some(v) => v.clone(),
            None if sym.is_relation => Value::Bool(false),
            None => Value::Undef,
        })
    }

    fn check_value(&self, loc: &Location, value: &Value) -> Result<(), StateError> {
        let sym = self.symbol_for(loc)?;
        if sym.is_relation && value.as_bool().is_none() {
            return Err(StateError::IllegalValue {
                location: loc.clone(),
                value: value.clone(),
            });
        }
        Ok(())
    }

    /// Direct assignment, used to build states.
    pub fn assign(&mut self, loc: Location, value: Value) -> Result<(), StateError> {
        self.check_value(&loc, &value)?;
        self.store(loc, value);
        Ok(())
    }

    pub fn with(mut self, loc: Location, value: Value) -> Result<Self, StateError> {
        self.assign(loc, value)?;
        Ok(self)
    }

    fn store(&mut self, loc: Location, value: Value) {
        let is_default = match &value {
            Value::Undef => true,
            Value::Bool(false) => self
                .vocabulary
                .get(&loc.symbol)
                .is_some_and(|s| s.is_relation),
            _ => false,
        };
        if is_default {
            self.interp.remove(&loc);
        } else {
            self.interp.insert(loc, value);
        }
    }

    /// The same state with `CT` set to `t`.
    pub fn at_time(&self, t: &Rational) -> State {
        let mut s = self.clone();
        s.store(Location::nullary(CURRENT_TIME), Value::number(t.clone()));
        s
    }

    /// Performs `us`. An inconsistent set does nothing. The flag reports
    /// whether at least one location actually changed.
    pub fn apply_updates(&self, us: &UpdateSet) -> Result<(State, bool), StateError> {
        for u in us {
            self.check_value(&u.location, &u.value)?;
        }
        if !consistent(us) {
            return Ok((self.clone(), false));
        }
        let mut next = self.clone();
        let mut changed = false;
        for u in us {
            if self.read(&u.location)? != u.value {
                changed = true;
                next.store(u.location.clone(), u.value.clone());
            }
        }
        Ok((next, changed))
    }

    /// Updates of `us` that would change this state.
    pub fn nontrivial(&self, us: &UpdateSet) -> Result<UpdateSet, StateError> {
        let mut out = UpdateSet::new();
        for u in us {
            if self.read(&u.location)? != u.value {
                out.insert(u.clone());
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::int;

    fn toy() -> State {
        let vocab = Vocabulary::new()
            .with(FunctionSymbol::new("f", 1, SymbolClass::Internal))
            .with(FunctionSymbol::new("Dir", 0, SymbolClass::Internal))
            .with(FunctionSymbol::relation("P", 1, SymbolClass::Internal));
        State::new(vocab, BTreeMap::new())
    }

    fn dir(v: &str) -> Update {
        Update::new(Location::nullary("Dir"), Value::atom(v))
    }

    #[test]
    fn consistency_of_small_sets() {
        let single: UpdateSet = [Update::new(
            Location::new("f", vec![Value::number(int(8))]),
            Value::number(int(7)),
        )]
        .into();
        assert!(consistent(&single));
        assert!(!consistent(&[dir("close"), dir("open")].into()));
        assert!(consistent(&[dir("close"), dir("close")].into()));
    }

    #[test]
    fn inconsistent_set_is_a_no_op() {
        let s = toy()
            .with(Location::nullary("Dir"), Value::atom("open"))
            .unwrap();
        let (next, changed) = s
            .apply_updates(&[dir("close"), dir("open")].into())
            .unwrap();
        assert_eq!(next, s);
        assert!(!changed);
    }

    #[test]
    fn trivial_update_reports_no_change() {
        let s = toy()
            .with(Location::nullary("Dir"), Value::atom("open"))
            .unwrap();
        let (next, changed) = s.apply_updates(&[dir("open")].into()).unwrap();
        assert_eq!(next, s);
        assert!(!changed);
    }

    #[test]
    fn defaults_for_unmapped_locations() {
        let s = toy();
        let p = Location::new("P", vec![Value::atom("a")]);
        assert_eq!(s.read(&p).unwrap(), Value::Bool(false));
        assert_eq!(s.read(&Location::nullary("Dir")).unwrap(), Value::Undef);
    }

    #[test]
    fn read_errors() {
        let s = toy();
        assert_eq!(
            s.read(&Location::nullary("Nope")),
            Err(StateError::UnknownSymbol("Nope".into()))
        );
        assert!(matches!(
            s.read(&Location::nullary("f")),
            Err(StateError::ArityMismatch {
                expected: 1,
                found: 0,
                ..
            })
        ));
    }

    #[test]
    fn relation_rejects_non_boolean() {
        let s = toy();
        let us: UpdateSet = [Update::new(
            Location::new("P", vec![Value::atom("a")]),
            Value::number(int(1)),
        )]
        .into();
        assert!(matches!(
            s.apply_updates(&us),
            Err(StateError::IllegalValue { .. })
        ));
    }
}
