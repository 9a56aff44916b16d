//! Line-based model and observation formats.
//!
//! ```text
//! # comment
//! var P measured
//! var U unmeasured
//! inf c1 of pump : U = 2*P + 1/2
//! ```
//!
//! `of COMPONENT` is optional and defaults to the influence id. Terms are
//! `RAT*ID` (or a bare `ID` for coefficient one) joined by `+` or `-`; an
//! optional constant comes last. Observations are `obs ID = RAT`, one per line.

use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::equation::Assignment;
use crate::model::{
    validate_model, AffineEquation, CausalGraph, ComponentId, Influence, InfluenceId, Measurability, Term,
    ValidationReport, Variable, VariableId,
};
use crate::value::{parse_value, Compact, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("invalid model:\n{0}")]
    Invalid(ValidationReport),
    #[error("duplicate observation of `{0}`")]
    DuplicateObservation(VariableId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Declaration {
    Var(Variable),
    Inf(Influence),
}

/// Declarations in source order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelDocument {
    pub declarations: Vec<Declaration>,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self, SyntaxError> {
        let mut declarations = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let mut lx = Lexer::new(strip_comment(raw), n + 1);
            let Some(keyword) = lx.peek_word() else {
                lx.finish()?;
                continue;
            };
            match keyword {
                "var" => declarations.push(Declaration::Var(parse_var(&mut lx)?)),
                "inf" => declarations.push(Declaration::Inf(parse_inf(&mut lx)?)),
                other => return Err(lx.error(format!("expected `var` or `inf`, found `{other}`"))),
            }
        }
        Ok(Self { declarations })
    }

    pub fn to_graph(&self) -> CausalGraph {
        let mut variables = Vec::new();
        let mut influences = Vec::new();
        for d in &self.declarations {
            match d {
                Declaration::Var(v) => variables.push(v.clone()),
                Declaration::Inf(i) => influences.push(i.clone()),
            }
        }
        CausalGraph::new(variables, influences)
    }

    pub fn from_graph(graph: &CausalGraph) -> Self {
        let declarations = graph
            .variables()
            .iter()
            .cloned()
            .map(Declaration::Var)
            .chain(graph.influences().iter().cloned().map(Declaration::Inf))
            .collect();
        Self { declarations }
    }
}

impl fmt::Display for ModelDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.declarations {
            match d {
                Declaration::Var(v) => {
                    let m = match v.measurability {
                        Measurability::Measured => "measured",
                        Measurability::Unmeasured => "unmeasured",
                    };
                    writeln!(f, "var {} {m}", v.id)?;
                }
                Declaration::Inf(i) => {
                    write!(f, "inf {}", i.id)?;
                    if i.component.as_str() != i.id.as_str() {
                        write!(f, " of {}", i.component)?;
                    }
                    write!(f, " : {} =", i.output)?;
                    for (k, t) in i.equation.terms.iter().enumerate() {
                        write_signed(f, &t.coefficient, k == 0)?;
                        write!(f, "*{}", t.input)?;
                    }
                    if !i.equation.constant.is_zero() {
                        write_signed(f, &i.equation.constant, false)?;
                    }
                    writeln!(f)?;
                }
            }
        }
        Ok(())
    }
}

fn write_signed(f: &mut fmt::Formatter<'_>, v: &Value, first: bool) -> fmt::Result {
    match (first, v.is_negative()) {
        (true, _) => write!(f, " {}", Compact(v)),
        (false, false) => write!(f, " + {}", Compact(v)),
        (false, true) => write!(f, " - {}", Compact(&v.abs())),
    }
}

/// Parses and validates a model.
pub fn parse_model(text: &str) -> Result<CausalGraph, ParseError> {
    let graph = ModelDocument::parse(text)?.to_graph();
    let report = validate_model(&graph);
    if report.is_valid() {
        Ok(graph)
    } else {
        Err(ParseError::Invalid(report))
    }
}

pub fn parse_observations(text: &str) -> Result<Assignment, ParseError> {
    let mut obs = Assignment::new();
    for (n, raw) in text.lines().enumerate() {
        let mut lx = Lexer::new(strip_comment(raw), n + 1);
        if lx.peek_word().is_none() {
            lx.finish()?;
            continue;
        }
        lx.keyword("obs")?;
        let id = VariableId::new(lx.ident()?);
        lx.expect('=')?;
        let value = lx.rational()?;
        lx.finish()?;
        if obs.insert(id.clone(), value).is_some() {
            return Err(ParseError::DuplicateObservation(id));
        }
    }
    Ok(obs)
}

pub fn format_observations(obs: &Assignment) -> String {
    obs.iter().map(|(k, v)| format!("obs {k} = {}\n", Compact(v))).collect()
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(code, _)| code)
}

fn parse_var(lx: &mut Lexer) -> Result<Variable, SyntaxError> {
    lx.keyword("var")?;
    let id = lx.ident()?;
    let measurability = match lx.word() {
        Some("measured") => Measurability::Measured,
        Some("unmeasured") => Measurability::Unmeasured,
        Some(other) => return Err(lx.error(format!("expected `measured` or `unmeasured`, found `{other}`"))),
        None => return Err(lx.error("expected `measured` or `unmeasured`")),
    };
    lx.finish()?;
    Ok(Variable {
        id: VariableId::new(id),
        measurability,
    })
}

fn parse_inf(lx: &mut Lexer) -> Result<Influence, SyntaxError> {
    lx.keyword("inf")?;
    let id = lx.ident()?.to_string();
    let component = if lx.peek_word() == Some("of") {
        lx.keyword("of")?;
        lx.ident()?.to_string()
    } else {
        id.clone()
    };
    lx.expect(':')?;
    let output = lx.ident()?.to_string();
    lx.expect('=')?;

    let mut terms = Vec::new();
    let mut constant = None;
    let mut first = true;
    loop {
        lx.skip_ws();
        if lx.at_end() {
            if first {
                return Err(lx.error("expected a term"));
            }
            break;
        }
        let negate = if first {
            false
        } else {
            match lx.next_char() {
                Some('+') => false,
                Some('-') => true,
                _ => return Err(lx.error("expected `+` or `-`")),
            }
        };
        if constant.is_some() {
            return Err(lx.error("the constant must be the last item"));
        }
        lx.skip_ws();
        let start = lx.column();
        let (coef, input) = if lx.peek_ident_start() {
            (Value::from_integer(1.into()), Some(lx.ident()?.to_string()))
        } else {
            let c = lx.rational()?;
            lx.skip_ws();
            if lx.peek_char() == Some('*') {
                lx.next_char();
                (c, Some(lx.ident()?.to_string()))
            } else {
                (c, None)
            }
        };
        let coef = if negate { -coef } else { coef };
        match input {
            Some(input) => terms.push(Term {
                input: VariableId::new(input),
                coefficient: coef,
            }),
            None if first => {
                return Err(SyntaxError {
                    line: lx.line,
                    column: start,
                    message: "an equation must start with a term".into(),
                })
            }
            None => constant = Some(coef),
        }
        first = false;
    }
    Ok(Influence {
        id: InfluenceId::new(id),
        component: ComponentId::new(component),
        output: VariableId::new(output),
        equation: AffineEquation {
            terms,
            constant: constant.unwrap_or_else(Value::zero),
        },
    })
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self { src, pos: 0, line }
    }

    fn column(&self) -> usize {
        self.src[..self.pos].chars().count() + 1
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn at_end(&self) -> bool {
        self.rest().is_empty()
    }

    fn peek_char(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn next_char(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn peek_ident_start(&self) -> bool {
        self.peek_char().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
    }

    fn finish(&mut self) -> Result<(), SyntaxError> {
        self.skip_ws();
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error(format!("unexpected `{}`", self.rest())))
        }
    }

    fn span(&self, pred: impl Fn(char) -> bool) -> &'a str {
        let rest = self.rest();
        let end = rest.find(|c: char| !pred(c)).unwrap_or(rest.len());
        &rest[..end]
    }

    fn peek_word(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let w = self.span(|c| c.is_ascii_alphanumeric() || c == '_');
        (!w.is_empty()).then_some(w)
    }

    fn word(&mut self) -> Option<&'a str> {
        let w = self.peek_word()?;
        self.pos += w.len();
        Some(w)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        match self.peek_word() {
            Some(w) if w == kw => {
                self.pos += w.len();
                Ok(())
            }
            _ => Err(self.error(format!("expected `{kw}`"))),
        }
    }

    fn ident(&mut self) -> Result<&'a str, SyntaxError> {
        self.skip_ws();
        if !self.peek_ident_start() {
            return Err(self.error("expected an identifier"));
        }
        let w = self.span(|c| c.is_ascii_alphanumeric() || c == '_');
        self.pos += w.len();
        Ok(w)
    }

    fn expect(&mut self, c: char) -> Result<(), SyntaxError> {
        self.skip_ws();
        if self.peek_char() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn rational(&mut self) -> Result<Value, SyntaxError> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek_char(), Some('-' | '+')) {
            self.pos += 1;
        }
        let body = self.span(|c| c.is_ascii_digit() || c == '.' || c == '/');
        self.pos += body.len();
        let literal = &self.src[start..self.pos];
        parse_value(literal).map_err(|e| SyntaxError {
            line: self.line,
            column: self.src[..start].chars().count() + 1,
            message: e.to_string(),
        })
    }
}
