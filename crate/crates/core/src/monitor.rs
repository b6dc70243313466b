//! Boolean monitoring of bounded temporal formulas over sampled traces, and
//! the bit-vector mode sequence built from a suite of such formulas.
//!
//! Semantics are sample-based. `always[a,b] φ` holds at sample time `t` iff
//! `φ` holds at every sample whose time lies in `[t+a, t+b]`; `eventually`
//! needs one such sample. Windows are clipped to the trace, so an empty
//! window makes `always` true and `eventually` false. Formulas are
//! evaluated at the first sample.
//!
//! # Grammar
//!
//! ```text
//! formula := conj ('->' formula)?
//! conj    := unary (('and' | '&') unary)*
//! unary   := ('not' | '!') unary
//!          | ('always' | 'G') interval unary
//!          | ('eventually' | 'F') interval unary
//!          | 'next' unary                  // eventually[0.001, 0.1]
//!          | '(' formula ')' | atom
//! interval := '[' number ',' number ']'
//! atom    := signal '<' number | signal '>=' number
//!          | discrete '==' token | discrete '!=' token
//! ```
//!
//! Suite files hold one formula per line; `#` starts a comment.

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::benchmarks::{SimTrace, TraceSimulator};
use crate::regions::ModeSequence;
use crate::simulator::{SimError, Simulator};

/// Slack when comparing sample times against window endpoints.
pub const TIME_EPS: f64 = 1e-9;
pub const NEXT_WINDOW: (f64, f64) = (0.001, 0.1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonitorError {
    #[error("cannot monitor an empty trace")]
    EmptyTrace,
    #[error("trace has no signal `{0}`")]
    UnknownSignal(String),
    #[error("trace discrete column is `{found}`, formula refers to `{wanted}`")]
    UnknownDiscrete { wanted: String, found: String },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("suite is empty")]
    EmptySuite,
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// `signal < threshold`
    Less { signal: String, threshold: f64 },
    /// `discrete == value`
    TokenEq { discrete: String, value: String },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Always { a: f64, b: f64, body: Box<Formula> },
    Eventually { a: f64, b: f64, body: Box<Formula> },
}

impl Formula {
    pub fn less(signal: &str, threshold: f64) -> Self {
        Formula::Less {
            signal: signal.into(),
            threshold,
        }
    }

    pub fn token_eq(discrete: &str, value: &str) -> Self {
        Formula::TokenEq {
            discrete: discrete.into(),
            value: value.into(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn implies(self, other: Formula) -> Self {
        Formula::Implies(Box::new(self), Box::new(other))
    }

    pub fn always(a: f64, b: f64, body: Formula) -> Self {
        Formula::Always {
            a,
            b,
            body: Box::new(body),
        }
    }

    pub fn eventually(a: f64, b: f64, body: Formula) -> Self {
        Formula::Eventually {
            a,
            b,
            body: Box::new(body),
        }
    }

    pub fn next(body: Formula) -> Self {
        Formula::eventually(NEXT_WINDOW.0, NEXT_WINDOW.1, body)
    }

    /// Latest time offset the formula can inspect.
    pub fn horizon(&self) -> f64 {
        match self {
            Formula::Less { .. } | Formula::TokenEq { .. } => 0.0,
            Formula::Not(f) => f.horizon(),
            Formula::And(l, r) | Formula::Implies(l, r) => l.horizon().max(r.horizon()),
            Formula::Always { b, body, .. } | Formula::Eventually { b, body, .. } => b + body.horizon(),
        }
    }

    fn check(&self) -> Result<(), String> {
        match self {
            Formula::Less { threshold, .. } if !threshold.is_finite() => Err("threshold must be finite".into()),
            Formula::Less { .. } | Formula::TokenEq { .. } => Ok(()),
            Formula::Not(f) => f.check(),
            Formula::And(l, r) | Formula::Implies(l, r) => l.check().and(r.check()),
            Formula::Always { a, b, body } | Formula::Eventually { a, b, body } => {
                if !(a.is_finite() && b.is_finite() && 0.0 <= *a && a <= b) {
                    return Err(format!("interval [{a}, {b}] must satisfy 0 <= a <= b"));
                }
                body.check()
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Less { signal, threshold } => write!(f, "{signal} < {threshold:?}"),
            Formula::TokenEq { discrete, value } => write!(f, "{discrete} == {value}"),
            Formula::Not(x) => write!(f, "not ({x})"),
            Formula::And(l, r) => write!(f, "({l}) and ({r})"),
            Formula::Implies(l, r) => write!(f, "({l}) -> ({r})"),
            Formula::Always { a, b, body } => write!(f, "always[{a:?}, {b:?}] ({body})"),
            Formula::Eventually { a, b, body } => write!(f, "eventually[{a:?}, {b:?}] ({body})"),
        }
    }
}

/// Truth value of `formula` at the first sample of `trace`.
pub fn monitor(formula: &Formula, trace: &SimTrace) -> Result<bool, MonitorError> {
    Ok(evaluate(formula, trace)?[0])
}

/// Truth value of `formula` at every sample of `trace`.
pub fn evaluate(formula: &Formula, trace: &SimTrace) -> Result<Vec<bool>, MonitorError> {
    if trace.is_empty() {
        return Err(MonitorError::EmptyTrace);
    }
    let mut ev = Evaluator { trace, warned: false };
    ev.eval(formula)
}

struct Evaluator<'a> {
    trace: &'a SimTrace,
    warned: bool,
}

impl Evaluator<'_> {
    fn eval(&mut self, f: &Formula) -> Result<Vec<bool>, MonitorError> {
        let tr = self.trace;
        Ok(match f {
            Formula::Less { signal, threshold } => {
                let k = tr
                    .signal_index(signal)
                    .ok_or_else(|| MonitorError::UnknownSignal(signal.clone()))?;
                tr.signal(k).map(|v| v < *threshold).collect()
            }
            Formula::TokenEq { discrete, value } => {
                if discrete != tr.discrete_name() {
                    return Err(MonitorError::UnknownDiscrete {
                        wanted: discrete.clone(),
                        found: tr.discrete_name().to_string(),
                    });
                }
                tr.discrete().iter().map(|d| d == value).collect()
            }
            Formula::Not(x) => self.eval(x)?.into_iter().map(|v| !v).collect(),
            Formula::And(l, r) => {
                let (l, r) = (self.eval(l)?, self.eval(r)?);
                l.iter().zip(&r).map(|(a, b)| *a && *b).collect()
            }
            Formula::Implies(l, r) => {
                let (l, r) = (self.eval(l)?, self.eval(r)?);
                l.iter().zip(&r).map(|(a, b)| !*a || *b).collect()
            }
            Formula::Always { a, b, body } => {
                let inner = self.eval(body)?;
                self.window(&inner, *a, *b, true)
            }
            Formula::Eventually { a, b, body } => {
                let inner = self.eval(body)?;
                self.window(&inner, *a, *b, false)
            }
        })
    }

    /// `all` selects always (every sample true) versus eventually (some sample true).
    fn window(&mut self, inner: &[bool], a: f64, b: f64, all: bool) -> Vec<bool> {
        let times = self.trace.times();
        let end = *times.last().expect("non-empty");
        // prefix[j] = number of true values among inner[..j]
        let mut prefix = Vec::with_capacity(inner.len() + 1);
        prefix.push(0usize);
        for &v in inner {
            prefix.push(prefix.last().unwrap() + usize::from(v));
        }
        let (mut lo, mut hi) = (0usize, 0usize);
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            while lo < times.len() && times[lo] < t + a - TIME_EPS {
                lo += 1;
            }
            hi = hi.max(lo);
            while hi < times.len() && times[hi] <= t + b + TIME_EPS {
                hi += 1;
            }
            let count = hi - lo;
            if count == 0 && t + a <= end && !self.warned {
                self.warned = true;
                log::warn!("window [{}, {}] at t = {t} contains no samples", t + a, t + b);
            }
            let trues = prefix[hi] - prefix[lo];
            out.push(if all { trues == count } else { trues > 0 });
        }
        out
    }
}

/// Pass/fail bits of a formula suite on one trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector(pub Vec<bool>);

impl BitVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One `0`/`1` symbol per bit.
    pub fn to_mode_sequence(&self) -> ModeSequence {
        ModeSequence::new(self.0.iter().map(|&b| if b { "1" } else { "0" }))
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

pub fn bitvector_mode_sequence(trace: &SimTrace, suite: &[Formula]) -> Result<BitVector, MonitorError> {
    if suite.is_empty() {
        return Err(MonitorError::EmptySuite);
    }
    suite.iter().map(|f| monitor(f, trace)).collect::<Result<_, _>>().map(BitVector)
}

/// The 13-formula automatic-transmission suite over signals `v`, `omega`
/// and discrete column `gear`.
pub fn at_suite() -> Vec<Formula> {
    let mut suite = Vec::with_capacity(13);
    for v in [80.0, 85.0, 90.0, 95.0] {
        suite.push(Formula::always(0.0, 10.0, Formula::less("v", v)));
    }
    for w in [4500.0, 4600.0, 4700.0] {
        suite.push(Formula::always(0.0, 8.0, Formula::less("omega", w)));
    }
    for v in [80.0, 100.0] {
        suite.push(
            Formula::always(0.0, 30.0, Formula::less("omega", 2000.0))
                .implies(Formula::always(0.0, 8.0, Formula::less("v", v))),
        );
    }
    for g in ["1", "2", "3", "4"] {
        let gear = || Formula::token_eq("gear", g);
        let engage = gear().not().and(Formula::next(gear()));
        let stays = Formula::next(Formula::always(0.0, 1.0, gear()));
        suite.push(Formula::always(0.0, 30.0, engage.implies(stays)));
    }
    suite
}

pub fn parse_formula(text: &str) -> Result<Formula, MonitorError> {
    parse_line(text, 1)
}

pub fn parse_suite(text: &str) -> Result<Vec<Formula>, MonitorError> {
    let mut suite = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if !body.is_empty() {
            suite.push(parse_line(body, i + 1)?);
        }
    }
    if suite.is_empty() {
        return Err(MonitorError::EmptySuite);
    }
    Ok(suite)
}

pub fn load_suite(path: &Path) -> Result<Vec<Formula>, MonitorError> {
    let text = std::fs::read_to_string(path).map_err(|e| MonitorError::Io(format!("{}: {e}", path.display())))?;
    parse_suite(&text)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64, String),
    Sym(&'static str),
}

fn parse_line(text: &str, line: usize) -> Result<Formula, MonitorError> {
    let toks = tokenize(text, line)?;
    let mut p = Parser { toks, pos: 0, line };
    let f = p.implication()?;
    if p.pos < p.toks.len() {
        return Err(p.error("unexpected trailing input"));
    }
    f.check().map_err(|m| p.error(&m))?;
    Ok(f)
}

fn tokenize(text: &str, line: usize) -> Result<Vec<(Tok, usize)>, MonitorError> {
    const SYMS: [&str; 12] = ["->", "<=", ">=", "==", "!=", "<", ">", "!", "&", "(", ")", "["];
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start + 1));
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || c == '.'
            || ((c == '-' || c == '+') && b.get(i + 1).is_some_and(|n| n.is_ascii_digit() || *n == b'.'));
        if starts_number {
            i += 1;
            while i < b.len() {
                let d = b[i] as char;
                let exp_sign = (d == '-' || d == '+') && matches!(b[i - 1], b'e' | b'E');
                if d.is_ascii_alphanumeric() || d == '.' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let s = &text[start..i];
            let v = s.parse::<f64>().map_err(|_| MonitorError::Parse {
                line,
                column: start + 1,
                message: format!("bad number `{s}`"),
            })?;
            out.push((Tok::Num(v, s.to_string()), start + 1));
            continue;
        }
        if let Some(sym) = SYMS.iter().chain(&["]", ","]).find(|s| text[i..].starts_with(**s)) {
            out.push((Tok::Sym(sym), start + 1));
            i += sym.len();
            continue;
        }
        return Err(MonitorError::Parse {
            line,
            column: start + 1,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
}

impl Parser {
    fn error(&self, message: &str) -> MonitorError {
        let column = self
            .toks
            .get(self.pos)
            .map_or_else(|| self.toks.last().map_or(1, |t| t.1 + 1), |t| t.1);
        MonitorError::Parse {
            line: self.line,
            column,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, words: &[&str]) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(x)) if words.contains(&x.as_str())) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), MonitorError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{s}`")))
        }
    }

    fn number(&mut self) -> Result<f64, MonitorError> {
        match self.peek() {
            Some(Tok::Num(v, _)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.error("expected a number")),
        }
    }

    fn implication(&mut self) -> Result<Formula, MonitorError> {
        let lhs = self.conjunction()?;
        if self.eat_sym("->") {
            return Ok(lhs.implies(self.implication()?));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, MonitorError> {
        let mut f = self.unary()?;
        while self.eat_sym("&") || self.eat_word(&["and"]) {
            f = f.and(self.unary()?);
        }
        Ok(f)
    }

    fn interval(&mut self) -> Result<(f64, f64), MonitorError> {
        self.expect_sym("[")?;
        let a = self.number()?;
        self.expect_sym(",")?;
        let b = self.number()?;
        self.expect_sym("]")?;
        Ok((a, b))
    }

    fn unary(&mut self) -> Result<Formula, MonitorError> {
        if self.eat_sym("!") || self.eat_word(&["not"]) {
            return Ok(self.unary()?.not());
        }
        if self.eat_word(&["always", "G"]) {
            let (a, b) = self.interval()?;
            return Ok(Formula::always(a, b, self.unary()?));
        }
        if self.eat_word(&["eventually", "F"]) {
            let (a, b) = self.interval()?;
            return Ok(Formula::eventually(a, b, self.unary()?));
        }
        if self.eat_word(&["next"]) {
            return Ok(Formula::next(self.unary()?));
        }
        if self.eat_sym("(") {
            let f = self.implication()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Formula, MonitorError> {
        let name = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.error("expected a formula")),
        };
        self.pos += 1;
        if self.eat_sym("<") {
            return Ok(Formula::less(&name, self.number()?));
        }
        if self.eat_sym(">=") {
            return Ok(Formula::less(&name, self.number()?).not());
        }
        let negate = if self.eat_sym("==") {
            false
        } else if self.eat_sym("!=") {
            true
        } else {
            return Err(self.error("expected `<`, `>=`, `==` or `!=`"));
        };
        let value = match self.peek() {
            Some(Tok::Ident(s)) | Some(Tok::Num(_, s)) => s.clone(),
            _ => return Err(self.error("expected a token value")),
        };
        self.pos += 1;
        let f = Formula::token_eq(&name, &value);
        Ok(if negate { f.not() } else { f })
    }
}

/// Turns a trace-producing simulator into a mode-sequence simulator via a formula suite.
pub struct BitVectorSimulator<T> {
    inner: T,
    suite: Vec<Formula>,
}

impl<T: TraceSimulator> BitVectorSimulator<T> {
    pub fn new(inner: T, suite: Vec<Formula>) -> Result<Self, MonitorError> {
        if suite.is_empty() {
            return Err(MonitorError::EmptySuite);
        }
        Ok(Self { inner, suite })
    }

    pub fn suite(&self) -> &[Formula] {
        &self.suite
    }
}

impl<T: TraceSimulator> Simulator for BitVectorSimulator<T> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn simulate(&mut self, x: &[f64]) -> Result<ModeSequence, SimError> {
        let trace = self.inner.trace(x)?;
        bitvector_mode_sequence(&trace, &self.suite)
            .map(|b| b.to_mode_sequence())
            .map_err(|e| SimError::Other(e.to_string()))
    }
}
