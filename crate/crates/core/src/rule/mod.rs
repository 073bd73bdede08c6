//! Terms, guards, rules and programs.
//!
//! The printer (`Display`) emits the same surface syntax that [`parse_rule`]
//! accepts, so `parse_rule(&r.to_string()) == r` for rules built from
//! symbols and numeric literals.

mod eval;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::state::{SymbolClass, Vocabulary, CURRENT_TIME};
use crate::value::Value;

pub use eval::{
    collect_updates, critical_times, enabled, eval_guard, eval_term, Environment, EvalError,
};
pub use parse::{
    parse_guard, parse_guard_in, parse_rule, parse_rule_with, parse_term, parse_term_in,
    SyntaxError,
};

pub const EQ: &str = "=";
pub const LT: &str = "<";
pub const PLUS: &str = "+";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
    Lit(Value),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn sym(name: &str) -> Term {
        Term::App(name.to_string(), Vec::new())
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(name.to_string(), args)
    }

    pub fn ct() -> Term {
        Term::sym(CURRENT_TIME)
    }

    pub fn lit(v: impl Into<Value>) -> Term {
        Term::Lit(v.into())
    }

    pub fn infinity() -> Term {
        Term::Lit(Value::infinity())
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::App(EQ.into(), vec![a, b])
    }

    pub fn lt(a: Term, b: Term) -> Term {
        Term::App(LT.into(), vec![a, b])
    }

    pub fn plus(a: Term, b: Term) -> Term {
        Term::App(PLUS.into(), vec![a, b])
    }

    fn is_builtin(name: &str, args: &[Term]) -> bool {
        args.len() == 2 && matches!(name, EQ | LT | PLUS)
    }

    fn is_comparison(&self) -> bool {
        matches!(self, Term::App(n, a) if a.len() == 2 && (n == EQ || n == LT))
    }

    fn is_sum(&self) -> bool {
        matches!(self, Term::App(n, a) if a.len() == 2 && n == PLUS)
    }

    /// True if `CT` occurs anywhere in the term.
    pub fn mentions_time(&self) -> bool {
        match self {
            Term::App(n, args) => n == CURRENT_TIME || args.iter().any(Term::mentions_time),
            _ => false,
        }
    }

    /// Non-builtin function symbols occurring in the term.
    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        if let Term::App(n, args) = self {
            if !Term::is_builtin(n, args) {
                out.insert(n.clone());
            }
            args.iter().for_each(|a| a.symbols(out));
        }
    }

    fn free_vars(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) if !bound.contains(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.free_vars(bound, out)),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    /// A predicate application, including `=` and `<`.
    Term(Term),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Forall {
        var: String,
        universe: String,
        body: Box<Guard>,
    },
}

impl Guard {
    pub fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Guard {
        Guard::Or(Box::new(a), Box::new(b))
    }

    pub fn forall(var: &str, universe: &str, body: Guard) -> Guard {
        Guard::Forall {
            var: var.into(),
            universe: universe.into(),
            body: Box::new(body),
        }
    }

    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Guard::Term(t) => t.symbols(out),
            Guard::Not(g) => g.symbols(out),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Guard::Forall { body, .. } => body.symbols(out),
        }
    }

    fn free_vars(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Guard::Term(t) => t.free_vars(bound, out),
            Guard::Not(g) => g.free_vars(bound, out),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.free_vars(bound, out);
                b.free_vars(bound, out);
            }
            Guard::Forall { var, body, .. } => {
                bound.push(var.clone());
                body.free_vars(bound, out);
                bound.pop();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rule {
    Update {
        head: String,
        args: Vec<Term>,
        rhs: Term,
    },
    Cond {
        guard: Guard,
        then_branch: Box<Rule>,
        else_branch: Option<Box<Rule>>,
    },
    Block(Vec<Rule>),
    VarRange {
        var: String,
        universe: String,
        body: Box<Rule>,
    },
}

impl Rule {
    pub fn update(head: &str, args: Vec<Term>, rhs: Term) -> Rule {
        Rule::Update {
            head: head.into(),
            args,
            rhs,
        }
    }

    pub fn when(guard: Guard, then_branch: Rule) -> Rule {
        Rule::Cond {
            guard,
            then_branch: Box::new(then_branch),
            else_branch: None,
        }
    }

    pub fn if_else(guard: Guard, then_branch: Rule, else_branch: Rule) -> Rule {
        Rule::Cond {
            guard,
            then_branch: Box::new(then_branch),
            else_branch: Some(Box::new(else_branch)),
        }
    }

    pub fn var_range(var: &str, universe: &str, body: Rule) -> Rule {
        Rule::VarRange {
            var: var.into(),
            universe: universe.into(),
            body: Box::new(body),
        }
    }

    /// Head symbols of all update rules inside.
    pub fn heads(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_heads(&mut out);
        out
    }

    fn collect_heads(&self, out: &mut BTreeSet<String>) {
        match self {
            Rule::Update { head, .. } => {
                out.insert(head.clone());
            }
            Rule::Cond {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.collect_heads(out);
                if let Some(e) = else_branch {
                    e.collect_heads(out);
                }
            }
            Rule::Block(rules) => rules.iter().for_each(|r| r.collect_heads(out)),
            Rule::VarRange { body, .. } => body.collect_heads(out),
        }
    }

    /// All non-builtin function symbols, heads included.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Rule::Update { head, args, rhs } => {
                out.insert(head.clone());
                args.iter().for_each(|a| a.symbols(out));
                rhs.symbols(out);
            }
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
            } => {
                guard.symbols(out);
                then_branch.collect_symbols(out);
                if let Some(e) = else_branch {
                    e.collect_symbols(out);
                }
            }
            Rule::Block(rules) => rules.iter().for_each(|r| r.collect_symbols(out)),
            Rule::VarRange { body, .. } => body.collect_symbols(out),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free_vars(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Rule::Update { args, rhs, .. } => {
                args.iter().for_each(|a| a.free_vars(bound, out));
                rhs.free_vars(bound, out);
            }
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
            } => {
                guard.free_vars(bound, out);
                then_branch.collect_free_vars(bound, out);
                if let Some(e) = else_branch {
                    e.collect_free_vars(bound, out);
                }
            }
            Rule::Block(rules) => rules.iter().for_each(|r| r.collect_free_vars(bound, out)),
            Rule::VarRange { var, body, .. } => {
                bound.push(var.clone());
                body.collect_free_vars(bound, out);
                bound.pop();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("module `{module}` has free variables {vars:?}")]
    FreeVariables { module: String, vars: Vec<String> },
    #[error("module `{module}` mentions unknown symbol `{symbol}`")]
    UnknownSymbol { module: String, symbol: String },
    #[error("module `{module}` updates `{symbol}`, which is not internal")]
    NonInternalHead { module: String, symbol: String },
}

/// A finite set of closed rules, one per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    vocabulary: Vocabulary,
    modules: BTreeMap<String, Rule>,
}

impl Program {
    pub fn new(
        vocabulary: Vocabulary,
        modules: BTreeMap<String, Rule>,
    ) -> Result<Program, ProgramError> {
        for (name, rule) in &modules {
            let free = rule.free_vars();
            if !free.is_empty() {
                return Err(ProgramError::FreeVariables {
                    module: name.clone(),
                    vars: free.into_iter().collect(),
                });
            }
            for symbol in rule.symbols() {
                if !vocabulary.contains(&symbol) {
                    return Err(ProgramError::UnknownSymbol {
                        module: name.clone(),
                        symbol,
                    });
                }
            }
            for symbol in rule.heads() {
                if vocabulary.class_of(&symbol) != Some(SymbolClass::Internal) {
                    return Err(ProgramError::NonInternalHead {
                        module: name.clone(),
                        symbol,
                    });
                }
            }
        }
        Ok(Program {
            vocabulary,
            modules,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn modules(&self) -> &BTreeMap<String, Rule> {
        &self.modules
    }

    pub fn module(&self, name: &str) -> Option<&Rule> {
        self.modules.get(name)
    }

    pub fn agents(&self) -> impl Iterator<Item = &str> {
        self.modules.keys().map(String::as_str)
    }
}

// ---------------------------------------------------------------------------
// Printing

fn write_literal(f: &mut fmt::Formatter<'_>, v: &Value) -> fmt::Result {
    match v {
        // Negative literals are lexed as a single token.
        Value::Number(n) => write!(f, "{n}"),
        other => write!(f, "{other}"),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Lit(v) => write_literal(f, v),
            Term::App(n, args) if self.is_comparison() => {
                let wrap = |t: &Term| t.is_comparison();
                write_operand(f, &args[0], wrap(&args[0]))?;
                write!(f, " {n} ")?;
                write_operand(f, &args[1], wrap(&args[1]))
            }
            Term::App(_, args) if self.is_sum() => {
                write_operand(f, &args[0], args[0].is_comparison())?;
                f.write_str(" + ")?;
                write_operand(f, &args[1], args[1].is_comparison() || args[1].is_sum())
            }
            Term::App(n, args) => {
                f.write_str(n)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, t: &Term, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

impl Guard {
    fn precedence(&self) -> u8 {
        match self {
            Guard::Or(..) => 0,
            Guard::And(..) => 1,
            _ => 2,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            return write!(f, "[{self}]");
        }
        match self {
            Guard::Term(t) => write!(f, "{t}"),
            Guard::Not(g) => {
                f.write_str("not ")?;
                g.write_at(f, 2)
            }
            Guard::And(a, b) => {
                a.write_at(f, 1)?;
                f.write_str(" and ")?;
                b.write_at(f, 2)
            }
            Guard::Or(a, b) => {
                a.write_at(f, 0)?;
                f.write_str(" or ")?;
                b.write_at(f, 1)
            }
            Guard::Forall {
                var,
                universe,
                body,
            } => write!(f, "forall {var} in {universe} [{body}]"),
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl Rule {
    fn write_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match self {
            Rule::Update { head, args, rhs } => {
                write!(f, "{pad}{}", Term::App(head.clone(), args.clone()))?;
                writeln!(f, " := {rhs}")
            }
            Rule::Cond {
                guard,
                then_branch,
                else_branch,
            } => {
                writeln!(f, "{pad}if {guard} then")?;
                then_branch.write_indented(f, depth + 1)?;
                if let Some(e) = else_branch {
                    writeln!(f, "{pad}else")?;
                    e.write_indented(f, depth + 1)?;
                }
                writeln!(f, "{pad}endif")
            }
            Rule::Block(rules) => {
                writeln!(f, "{pad}block")?;
                for r in rules {
                    r.write_indented(f, depth + 1)?;
                }
                writeln!(f, "{pad}endblock")
            }
            Rule::VarRange {
                var,
                universe,
                body,
            } => {
                writeln!(f, "{pad}var {var} ranges over {universe}")?;
                body.write_indented(f, depth + 1)?;
                writeln!(f, "{pad}endvar")
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

impl std::ops::Not for Guard {
    type Output = Guard;

    fn not(self) -> Guard {
        Guard::Not(Box::new(self))
    }
}
