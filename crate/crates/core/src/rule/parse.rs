//! Surface syntax:
//!
//! ```text
//! rule  := "if" guard "then" rule ["else" rule] "endif"
//!        | "block" rule* "endblock"
//!        | "var" IDENT "ranges" "over" IDENT rule "endvar"
//!        | IDENT ["(" term {"," term} ")"] ":=" term
//! guard := conj {"or" conj}
//! conj  := unary {"and" unary}
//! unary := "not" unary | "[" guard "]" | "forall" IDENT "in" IDENT "[" guard "]" | term
//! term  := sum [("=" | "<") sum]
//! sum   := atom {"+" atom}
//! atom  := NUMBER | "infinity" | "true" | "false" | "undef"
//!        | IDENT ["(" term {"," term} ")"] | "(" term ")"
//! ```
//!
//! Numbers are decimal (`13.5`) or ratios (`27/2`).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{Guard, Rule, Term};
use crate::value::{parse_rational, Rational, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(Rational),
    Keyword(&'static str),
    Assign,
    Eq,
    Lt,
    Plus,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Number(r) => write!(f, "number `{r}`"),
            Tok::Keyword(k) => write!(f, "keyword `{k}`"),
            Tok::Assign => f.write_str("`:=`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "if", "then", "else", "endif", "block", "endblock", "var", "ranges", "over", "endvar", "and",
    "or", "not", "forall", "in", "infinity", "true", "false", "undef",
];

struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, column, message: String| SyntaxError {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Keyword(k),
                None => Tok::Ident(word),
            }
        } else if c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            advance(1, &mut i, &mut col);
            while i < chars.len() && (chars[i].is_ascii_digit() || matches!(chars[i], '.' | '/')) {
                advance(1, &mut i, &mut col);
            }
            let lit: String = chars[start..i].iter().collect();
            let r = parse_rational(&lit).map_err(|e| err(start_line, start_col, e.to_string()))?;
            Tok::Number(r)
        } else {
            let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
            if two == ":=" {
                advance(2, &mut i, &mut col);
                Tok::Assign
            } else {
                let t = match c {
                    '=' => Tok::Eq,
                    '<' => Tok::Lt,
                    '+' => Tok::Plus,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    other => return Err(err(line, col, format!("unexpected character {other:?}"))),
                };
                advance(1, &mut i, &mut col);
                t
            }
        };
        out.push(Token {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    scope: Vec<String>,
    abbreviations: &'a BTreeMap<String, Guard>,
}

impl<'a> Parser<'a> {
    fn new(text: &str, abbreviations: &'a BTreeMap<String, Guard>) -> Result<Self, SyntaxError> {
        Ok(Parser {
            tokens: lex(text)?,
            pos: 0,
            scope: Vec::new(),
            abbreviations,
        })
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        let t = &self.tokens[self.pos];
        SyntaxError {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn unexpected(&self, wanted: &str) -> SyntaxError {
        self.error(format!("expected {wanted}, found {}", self.peek()))
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn keyword(&mut self, k: &'static str) -> Result<(), SyntaxError> {
        self.expect(Tok::Keyword(k))
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn finish(&mut self) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn rule(&mut self) -> Result<Rule, SyntaxError> {
        match self.peek().clone() {
            Tok::Keyword("if") => {
                self.bump();
                let guard = self.guard()?;
                self.keyword("then")?;
                let then_branch = Box::new(self.rule()?);
                let else_branch = if self.eat(&Tok::Keyword("else")) {
                    Some(Box::new(self.rule()?))
                } else {
                    None
                };
                self.keyword("endif")?;
                Ok(Rule::Cond {
                    guard,
                    then_branch,
                    else_branch,
                })
            }
            Tok::Keyword("block") => {
                self.bump();
                let mut rules = Vec::new();
                while !self.eat(&Tok::Keyword("endblock")) {
                    if *self.peek() == Tok::Eof {
                        return Err(self.unexpected("`endblock`"));
                    }
                    rules.push(self.rule()?);
                }
                Ok(Rule::Block(rules))
            }
            Tok::Keyword("var") => {
                self.bump();
                let var = self.ident()?;
                self.keyword("ranges")?;
                self.keyword("over")?;
                let universe = self.ident()?;
                self.scope.push(var.clone());
                let body = self.rule();
                self.scope.pop();
                let body = Box::new(body?);
                self.keyword("endvar")?;
                Ok(Rule::VarRange {
                    var,
                    universe,
                    body,
                })
            }
            Tok::Ident(head) => {
                if self.scope.contains(&head) {
                    return Err(self.error(format!("variable `{head}` cannot be an update head")));
                }
                self.bump();
                let args = if *self.peek() == Tok::LParen {
                    self.arguments()?
                } else {
                    Vec::new()
                };
                self.expect(Tok::Assign)?;
                let rhs = self.term()?;
                Ok(Rule::Update { head, args, rhs })
            }
            _ => Err(self.unexpected("a rule")),
        }
    }

    fn guard(&mut self) -> Result<Guard, SyntaxError> {
        let mut g = self.conjunction()?;
        while self.eat(&Tok::Keyword("or")) {
            g = Guard::or(g, self.conjunction()?);
        }
        Ok(g)
    }

    fn conjunction(&mut self) -> Result<Guard, SyntaxError> {
        let mut g = self.unary_guard()?;
        while self.eat(&Tok::Keyword("and")) {
            g = Guard::and(g, self.unary_guard()?);
        }
        Ok(g)
    }

    fn unary_guard(&mut self) -> Result<Guard, SyntaxError> {
        match self.peek() {
            Tok::Keyword("not") => {
                self.bump();
                Ok(!self.unary_guard()?)
            }
            Tok::LBracket => {
                self.bump();
                let g = self.guard()?;
                self.expect(Tok::RBracket)?;
                Ok(g)
            }
            Tok::Keyword("forall") => {
                self.bump();
                let var = self.ident()?;
                self.keyword("in")?;
                let universe = self.ident()?;
                self.expect(Tok::LBracket)?;
                self.scope.push(var.clone());
                let body = self.guard();
                self.scope.pop();
                let body = body?;
                self.expect(Tok::RBracket)?;
                Ok(Guard::forall(&var, &universe, body))
            }
            _ => {
                let t = self.term()?;
                if let Term::App(name, args) = &t {
                    if args.is_empty() {
                        if let Some(g) = self.abbreviations.get(name) {
                            return Ok(g.clone());
                        }
                    }
                }
                Ok(Guard::Term(t))
            }
        }
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        let lhs = self.sum()?;
        if self.eat(&Tok::Eq) {
            Ok(Term::eq(lhs, self.sum()?))
        } else if self.eat(&Tok::Lt) {
            Ok(Term::lt(lhs, self.sum()?))
        } else {
            Ok(lhs)
        }
    }

    fn sum(&mut self) -> Result<Term, SyntaxError> {
        let mut t = self.atom()?;
        while self.eat(&Tok::Plus) {
            t = Term::plus(t, self.atom()?);
        }
        Ok(t)
    }

    fn arguments(&mut self) -> Result<Vec<Term>, SyntaxError> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.term()?];
        while self.eat(&Tok::Comma) {
            args.push(self.term()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn atom(&mut self) -> Result<Term, SyntaxError> {
        match self.peek().clone() {
            Tok::Number(r) => {
                self.bump();
                Ok(Term::Lit(Value::number(r)))
            }
            Tok::Keyword("infinity") => {
                self.bump();
                Ok(Term::infinity())
            }
            Tok::Keyword("true") => {
                self.bump();
                Ok(Term::Lit(Value::Bool(true)))
            }
            Tok::Keyword("false") => {
                self.bump();
                Ok(Term::Lit(Value::Bool(false)))
            }
            Tok::Keyword("undef") => {
                self.bump();
                Ok(Term::Lit(Value::Undef))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.scope.contains(&name) {
                    return Ok(Term::Var(name));
                }
                let args = if *self.peek() == Tok::LParen {
                    self.arguments()?
                } else {
                    Vec::new()
                };
                Ok(Term::App(name, args))
            }
            _ => Err(self.unexpected("a term")),
        }
    }
}

pub fn parse_rule(text: &str) -> Result<Rule, SyntaxError> {
    parse_rule_with(text, &BTreeMap::new())
}

/// Parses a rule, inlining every bare identifier in guard position that
/// names one of `abbreviations`.
pub fn parse_rule_with(
    text: &str,
    abbreviations: &BTreeMap<String, Guard>,
) -> Result<Rule, SyntaxError> {
    let mut p = Parser::new(text, abbreviations)?;
    let r = p.rule()?;
    p.finish()?;
    Ok(r)
}

pub fn parse_guard(text: &str) -> Result<Guard, SyntaxError> {
    parse_guard_in(text, &[])
}

/// Parses a guard in which `vars` are bound variables.
pub fn parse_guard_in(text: &str, vars: &[&str]) -> Result<Guard, SyntaxError> {
    let empty = BTreeMap::new();
    let mut p = Parser::new(text, &empty)?;
    p.scope = vars.iter().map(|v| v.to_string()).collect();
    let g = p.guard()?;
    p.finish()?;
    Ok(g)
}

pub fn parse_term(text: &str) -> Result<Term, SyntaxError> {
    parse_term_in(text, &[])
}

/// Parses a term in which `vars` are bound variables.
pub fn parse_term_in(text: &str, vars: &[&str]) -> Result<Term, SyntaxError> {
    let empty = BTreeMap::new();
    let mut p = Parser::new(text, &empty)?;
    p.scope = vars.iter().map(|v| v.to_string()).collect();
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_update() {
        let r = parse_rule("if Dir = open then GateStatus := opened endif").unwrap();
        assert_eq!(
            r,
            Rule::when(
                Guard::Term(Term::eq(Term::sym("Dir"), Term::sym("open"))),
                Rule::update("GateStatus", vec![], Term::sym("opened")),
            )
        );
    }

    #[test]
    fn var_range_binds_variable() {
        let r = parse_rule(
            "var x ranges over Tracks if TrackStatus(x) = empty and Deadline(x) < infinity \
             then Deadline(x) := infinity endif endvar",
        )
        .unwrap();
        let x = || Term::var("x");
        let expected = Rule::var_range(
            "x",
            "Tracks",
            Rule::when(
                Guard::and(
                    Guard::Term(Term::eq(
                        Term::app("TrackStatus", vec![x()]),
                        Term::sym("empty"),
                    )),
                    Guard::Term(Term::lt(Term::app("Deadline", vec![x()]), Term::infinity())),
                ),
                Rule::update("Deadline", vec![x()], Term::infinity()),
            ),
        );
        assert_eq!(r, expected);
    }

    #[test]
    fn missing_right_hand_side() {
        let e = parse_rule("GateStatus :=").unwrap_err();
        assert_eq!((e.line, e.column), (1, 14));
        assert!(e.message.contains("expected a term"), "{e}");
    }

    #[test]
    fn variable_cannot_be_head() {
        let e = parse_rule("var x ranges over U x := 1 endvar").unwrap_err();
        assert!(e.message.contains("cannot be an update head"));
    }

    #[test]
    fn reports_line_and_column() {
        let e = parse_rule("block\n  Dir := close\n  if Dir then endif\nendblock").unwrap_err();
        assert_eq!((e.line, e.column), (3, 15));
    }

    #[test]
    fn malformed_number() {
        let e = parse_term("1.2.3").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
    }

    #[test]
    fn abbreviation_is_inlined() {
        let mut abbr = BTreeMap::new();
        abbr.insert(
            "Safe".to_string(),
            parse_guard("forall y in U [P(y)]").unwrap(),
        );
        let r = parse_rule_with("if Dir = close and Safe then Dir := open endif", &abbr).unwrap();
        let Rule::Cond { guard, .. } = r else {
            panic!()
        };
        assert_eq!(
            guard,
            Guard::and(
                Guard::Term(Term::eq(Term::sym("Dir"), Term::sym("close"))),
                Guard::forall("y", "U", Guard::Term(Term::app("P", vec![Term::var("y")]))),
            )
        );
    }

    #[test]
    fn rational_literals() {
        assert_eq!(
            parse_term("27/2 + 0.5").unwrap(),
            Term::plus(
                Term::lit(crate::value::rat(27, 2)),
                Term::lit(crate::value::rat(1, 2))
            )
        );
    }
}
