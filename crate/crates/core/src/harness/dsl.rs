//! Config language.
//!
//! ```text
//! config  := block*
//! block   := experiment "{" field* "}"
//! field   := key "=" value
//! weight  := factor ("*" factor)*
//! factor  := primary ("^" real)*
//! primary := "one" | "power(" real ")" | "a1max(" func "," real ")"
//!          | "hatq2(" weight "," func "," func "," real "," real ")" | "(" weight ")"
//! func    := "indicator(" real "," real ")" | "bump(" real "," real ")" | "step(" int "," int ")"
//! family  := ("indicators" | "steps" | "trig" | "bumps" | "mixed") "(" int ")"
//! measure := "dirac(" real "," real ")" | "random(" int ")" | "[" atom ("," atom)* "]"
//! atom    := "atom(" real "," real "," real ["," real] ")"
//! ```
//!
//! Weight keys (`w1 w2 u v w`) and `p0` also take bracketed lists; lists of
//! equal length are zipped and single entries broadcast. `#` comments out the
//! rest of a line.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::families::{FamilyKind, FamilySpec};
use super::ExperimentId;
use crate::grid::{Grid, GridError};
use crate::operators::{Atom, AtomicMeasure, OperatorError, OperatorHandle};
use crate::weights::{ExponentTriple, FuncExpr, WeightExpr};
use crate::Complex64;

/// Measures may carry at most this many atoms.
pub const MAX_ATOMS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnknownIdentifier(String),
    MalformedReal(String),
    ExponentRelation(String),
    InvalidWeight(String),
    Invalid(String),
    Unexpected { expected: String, found: String },
    Missing(String),
    Duplicate(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownIdentifier(s) => write!(f, "unknown identifier `{s}`"),
            Self::MalformedReal(s) => write!(f, "malformed real literal `{s}`"),
            Self::ExponentRelation(s) => write!(f, "exponent relation violated: {s}"),
            Self::InvalidWeight(s) => write!(f, "invalid weight: {s}"),
            Self::Invalid(s) => f.write_str(s),
            Self::Unexpected { expected, found } => write!(f, "expected {expected}, found {found}"),
            Self::Missing(s) => write!(f, "missing field `{s}`"),
            Self::Duplicate(s) => write!(f, "field `{s}` given twice"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n: usize,
    pub half_length: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n: Grid::DESK_POINTS, half_length: Grid::DESK_HALF_LENGTH }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, GridError> {
        Grid::new(self.half_length, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MeasureSpec {
    Dirac(f64, f64),
    /// `k` atoms with seeded positions in `[-2, 2]^2` and masses in `[-1, 1]`.
    Random(usize),
    /// `(t, s, re, im)`.
    Atoms(Vec<(f64, f64, f64, f64)>),
}

impl MeasureSpec {
    /// The normalized measure.
    pub fn build(&self, seed: u64) -> Result<AtomicMeasure, OperatorError> {
        let atoms = match self {
            Self::Dirac(t, s) => return Ok(AtomicMeasure::dirac(*t, *s)),
            Self::Random(k) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(7);
                (0..*k)
                    .map(|_| {
                        let t = rng.gen_range(-2.0..2.0);
                        let s = rng.gen_range(-2.0..2.0);
                        let m: f64 = rng.gen_range(-1.0..1.0);
                        Atom { t, s, mu: Complex64::new(if m == 0.0 { 1.0 } else { m }, 0.0) }
                    })
                    .collect()
            }
            Self::Atoms(list) => list.iter().map(|&(t, s, re, im)| Atom { t, s, mu: Complex64::new(re, im) }).collect(),
        };
        AtomicMeasure::new(atoms)?.normalized()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Exponents {
    /// Bilinear experiments.
    Triple(ExponentTriple),
    /// Single-weight experiments; `r` pins the index of `u v^q` when given.
    Single { q: f64, r: Option<f64> },
}

/// A validated experiment block.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalitySpec {
    pub name: ExperimentId,
    /// `(T1, T2)` for bilinear experiments, `[T]` for E3 and E4, empty otherwise.
    pub operators: Vec<OperatorHandle>,
    pub exponents: Exponents,
    /// `(q1, q2)` of the Lorentz spaces on the right side (E5 and E6).
    pub lorentz: Option<(f64, f64)>,
    pub weights: BTreeMap<String, Vec<WeightExpr>>,
    pub family: FamilySpec,
    pub measure: Option<MeasureSpec>,
    pub p0: Vec<f64>,
    pub grid: GridSpec,
    pub seed: u64,
}

impl InequalitySpec {
    pub fn triple(&self) -> Option<ExponentTriple> {
        match self.exponents {
            Exponents::Triple(t) => Some(t),
            Exponents::Single { .. } => None,
        }
    }

    pub fn single(&self) -> Option<(f64, Option<f64>)> {
        match self.exponents {
            Exponents::Single { q, r } => Some((q, r)),
            Exponents::Triple(_) => None,
        }
    }

    /// Norms on each side, as text.
    pub fn norms(&self) -> (String, String) {
        match (self.name, self.exponents) {
            (ExperimentId::E3, Exponents::Single { q, .. }) => {
                (format!("L^({q},inf)(u v^{q}) of S f / v"), format!("L^({q},inf)(u v^{q}) of M f / v"))
            }
            (ExperimentId::E4, Exponents::Single { q, .. }) => (format!("L^({q},inf)(u v^{q})"), format!("L^({q},1)(u)")),
            (ExperimentId::E7, Exponents::Triple(t)) => {
                (format!("sup_lambda lambda^{} W(lambda < P <= 2 lambda)", t.p), "product of the factor weak norms, to the p".into())
            }
            (_, Exponents::Triple(t)) => {
                let (q1, q2) = self.lorentz.unwrap_or((1.0, 1.0));
                let s = |p: f64, q: f64| if self.lorentz.is_some() { p / q } else { 1.0 };
                (
                    format!("L^({},inf)(w1^(p/p1) w2^(p/p2))", t.p),
                    format!("L^({},{})(w1) x L^({},{})(w2)", t.p1, s(t.p1, q1), t.p2, s(t.p2, q2)),
                )
            }
            _ => (String::new(), String::new()),
        }
    }
}

/// Parses a config holding exactly one block.
pub fn parse_spec(text: &str) -> Result<InequalitySpec, ParseError> {
    let mut specs = parse_config(text)?;
    match specs.len() {
        1 => Ok(specs.remove(0)),
        0 => Err(ParseError { line: 1, column: 1, kind: ParseErrorKind::Missing("experiment block".into()) }),
        _ => Err(ParseError { line: 1, column: 1, kind: ParseErrorKind::Invalid("expected a single experiment block".into()) }),
    }
}

/// Parses a lone weight expression such as `power(0.5)*a1max(indicator(0,1),-0.5)`.
pub fn parse_weight(text: &str) -> Result<WeightExpr, ParseError> {
    let mut parser = Parser { tokens: lex(text)?, pos: 0 };
    let w = parser.weight()?;
    if !parser.at_end() {
        return Err(parser.unexpected("end of input"));
    }
    Ok(w)
}

/// Parses every block of a config.
pub fn parse_config(text: &str) -> Result<Vec<InequalitySpec>, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut out = Vec::new();
    while !parser.at_end() {
        out.push(parser.block()?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut column) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let take = |pred: &dyn Fn(char) -> bool, i: &mut usize, column: &mut usize| {
            let from = *i;
            while *i < chars.len() && pred(chars[*i]) {
                *i += 1;
                *column += 1;
            }
            chars[from..*i].iter().collect::<String>()
        };
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            Tok::Ident(take(&|c: char| c.is_ascii_alphanumeric() || c == '_', &mut i, &mut column))
        } else if c.is_ascii_digit() || matches!(c, '.' | '-' | '+') {
            // a literal runs until a delimiter, so `1.2.3` and `2x` are reported whole
            Tok::Number(take(&|c: char| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+' | '_'), &mut i, &mut column))
        } else if "{}()[],=*^".contains(c) {
            i += 1;
            column += 1;
            Tok::Sym(c)
        } else {
            return Err(ParseError {
                line,
                column,
                kind: ParseErrorKind::Unexpected { expected: "a token".into(), found: format!("`{c}`") },
            });
        };
        out.push(Token { tok, line: start.0, column: start.1 });
    }
    out.push(Token { tok: Tok::End, line, column });
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn error(self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column: self.column, kind }
    }
}

#[derive(Debug, Clone)]
enum Value {
    Real(f64),
    Int(u64),
    Reals(Vec<f64>),
    Weights(Vec<WeightExpr>),
    Family(FamilySpec),
    Operator(OperatorHandle),
    Measure(MeasureSpec),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

const REAL_KEYS: [&str; 8] = ["p1", "p2", "p", "q", "r", "q1", "q2", "L"];
const INT_KEYS: [&str; 2] = ["N", "seed"];
const WEIGHT_KEYS: [&str; 5] = ["w1", "w2", "u", "v", "w"];
const OPERATOR_KEYS: [&str; 3] = ["t", "t1", "t2"];

fn allowed_keys(id: ExperimentId) -> &'static [&'static str] {
    use ExperimentId::*;
    match id {
        E1 | E2 | E7 => &["p1", "p2", "p", "w1", "w2", "t1", "t2", "family", "N", "L", "seed"],
        E5 => &["p1", "p2", "p", "w1", "w2", "mu", "family", "N", "L", "seed"],
        E6 => &["p1", "p2", "p", "q1", "q2", "w1", "w2", "mu", "family", "N", "L", "seed"],
        E3 => &["q", "t", "u", "v", "w", "p0", "family", "N", "L", "seed"],
        E4 => &["q", "r", "t", "u", "v", "family", "N", "L", "seed"],
    }
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn here(&self) -> Pos {
        let t = self.peek();
        Pos { line: t.line, column: t.column }
    }

    fn at_end(&self) -> bool {
        self.peek().tok == Tok::End
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.here().error(ParseErrorKind::Unexpected { expected: expected.into(), found: self.peek().tok.to_string() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        let pos = self.here();
        match self.next().tok {
            Tok::Ident(s) => Ok((s, pos)),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("an identifier"))
            }
        }
    }

    fn real(&mut self) -> Result<f64, ParseError> {
        let pos = self.here();
        match self.next().tok {
            Tok::Number(s) => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(pos.error(ParseErrorKind::MalformedReal(s))),
            },
            Tok::Ident(s) => Err(pos.error(ParseErrorKind::MalformedReal(s))),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a real number"))
            }
        }
    }

    fn integer(&mut self) -> Result<u64, ParseError> {
        let pos = self.here();
        match self.next().tok {
            Tok::Number(s) => s
                .parse::<u64>()
                .map_err(|_| pos.error(ParseErrorKind::Invalid(format!("expected a nonnegative integer, found `{s}`")))),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("an integer"))
            }
        }
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, ParseError>) -> Result<Vec<T>, ParseError> {
        if !self.eat('[') {
            return Ok(vec![item(self)?]);
        }
        let mut out = vec![item(self)?];
        while self.eat(',') {
            out.push(item(self)?);
        }
        self.expect(']')?;
        Ok(out)
    }

    fn func(&mut self) -> Result<FuncExpr, ParseError> {
        let (name, pos) = self.ident()?;
        self.expect('(')?;
        let f = match name.as_str() {
            "indicator" => {
                let a = self.real()?;
                self.expect(',')?;
                FuncExpr::Indicator(a, self.real()?)
            }
            "bump" => {
                let c = self.real()?;
                self.expect(',')?;
                FuncExpr::Bump(c, self.real()?)
            }
            "step" => {
                let seed = self.integer()?;
                self.expect(',')?;
                FuncExpr::Step { seed, count: self.integer()? as usize }
            }
            _ => return Err(pos.error(ParseErrorKind::UnknownIdentifier(name))),
        };
        self.expect(')')?;
        f.validate().map_err(|e| pos.error(ParseErrorKind::InvalidWeight(e.to_string())))?;
        Ok(f)
    }

    fn weight(&mut self) -> Result<WeightExpr, ParseError> {
        let mut w = self.factor()?;
        while self.eat('*') {
            w = WeightExpr::Mul(Box::new(w), Box::new(self.factor()?));
        }
        Ok(w)
    }

    fn factor(&mut self) -> Result<WeightExpr, ParseError> {
        let mut w = self.primary()?;
        while self.eat('^') {
            w = WeightExpr::Pow(Box::new(w), self.real()?);
        }
        Ok(w)
    }

    fn primary(&mut self) -> Result<WeightExpr, ParseError> {
        if self.eat('(') {
            let w = self.weight()?;
            self.expect(')')?;
            return Ok(w);
        }
        let (name, pos) = self.ident()?;
        let invalid = |msg: String| pos.error(ParseErrorKind::InvalidWeight(msg));
        if name == "one" {
            return Ok(WeightExpr::One);
        }
        self.expect('(')?;
        let w = match name.as_str() {
            "power" => {
                let a = self.real()?;
                if a <= -1.0 {
                    return Err(invalid(format!("power({a}) is not locally integrable; the exponent must exceed -1")));
                }
                WeightExpr::Power(a)
            }
            "a1max" => {
                let h = self.func()?;
                self.expect(',')?;
                WeightExpr::A1Max(h, self.real()?)
            }
            "hatq2" => {
                let u0 = self.weight()?;
                self.expect(',')?;
                let h1 = self.func()?;
                self.expect(',')?;
                let h2 = self.func()?;
                self.expect(',')?;
                let alpha = self.real()?;
                self.expect(',')?;
                let q = self.real()?;
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(invalid(format!("hatq2 needs alpha in [0, 1], got {alpha}")));
                }
                if q < 1.0 {
                    return Err(invalid(format!("hatq2 needs q >= 1, got {q}")));
                }
                WeightExpr::HatQ2 { u0: Box::new(u0), h1, h2, alpha, q }
            }
            _ => return Err(pos.error(ParseErrorKind::UnknownIdentifier(name))),
        };
        self.expect(')')?;
        Ok(w)
    }

    fn family(&mut self) -> Result<FamilySpec, ParseError> {
        let (name, pos) = self.ident()?;
        let kind = match name.as_str() {
            "indicators" => FamilyKind::Indicators,
            "steps" => FamilyKind::Steps,
            "trig" => FamilyKind::Trig,
            "bumps" => FamilyKind::Bumps,
            "mixed" => FamilyKind::Mixed,
            _ => return Err(pos.error(ParseErrorKind::UnknownIdentifier(name))),
        };
        self.expect('(')?;
        let count = self.integer()? as usize;
        self.expect(')')?;
        if count == 0 {
            return Err(pos.error(ParseErrorKind::Invalid("a family needs at least one member".into())));
        }
        Ok(FamilySpec { kind, count })
    }

    fn measure(&mut self) -> Result<MeasureSpec, ParseError> {
        let pos = self.here();
        let m = if self.peek().tok == Tok::Sym('[') {
            MeasureSpec::Atoms(self.list(|p| {
                let (name, pos) = p.ident()?;
                if name != "atom" {
                    return Err(pos.error(ParseErrorKind::UnknownIdentifier(name)));
                }
                p.expect('(')?;
                let t = p.real()?;
                p.expect(',')?;
                let s = p.real()?;
                p.expect(',')?;
                let re = p.real()?;
                let im = if p.eat(',') { p.real()? } else { 0.0 };
                p.expect(')')?;
                Ok((t, s, re, im))
            })?)
        } else {
            let (name, pos) = self.ident()?;
            self.expect('(')?;
            let m = match name.as_str() {
                "dirac" => {
                    let t = self.real()?;
                    self.expect(',')?;
                    MeasureSpec::Dirac(t, self.real()?)
                }
                "random" => MeasureSpec::Random(self.integer()? as usize),
                _ => return Err(pos.error(ParseErrorKind::UnknownIdentifier(name))),
            };
            self.expect(')')?;
            m
        };
        let atoms = match &m {
            MeasureSpec::Dirac(..) => 1,
            MeasureSpec::Random(k) => *k,
            MeasureSpec::Atoms(a) => a.len(),
        };
        if atoms == 0 || atoms > MAX_ATOMS {
            return Err(pos.error(ParseErrorKind::Invalid(format!("a measure needs 1 to {MAX_ATOMS} atoms, got {atoms}"))));
        }
        Ok(m)
    }

    fn value(&mut self, key: &str, pos: Pos) -> Result<Value, ParseError> {
        if REAL_KEYS.contains(&key) {
            return Ok(Value::Real(self.real()?));
        }
        if INT_KEYS.contains(&key) {
            return Ok(Value::Int(self.integer()?));
        }
        if WEIGHT_KEYS.contains(&key) {
            return Ok(Value::Weights(self.list(Self::weight)?));
        }
        if OPERATOR_KEYS.contains(&key) {
            let (name, pos) = self.ident()?;
            return name.parse().map(Value::Operator).map_err(|_| pos.error(ParseErrorKind::UnknownIdentifier(name)));
        }
        match key {
            "p0" => Ok(Value::Reals(self.list(Self::real)?)),
            "family" => Ok(Value::Family(self.family()?)),
            "mu" => Ok(Value::Measure(self.measure()?)),
            _ => Err(pos.error(ParseErrorKind::UnknownIdentifier(key.into()))),
        }
    }

    fn block(&mut self) -> Result<InequalitySpec, ParseError> {
        let (name, head) = self.ident()?;
        let id: ExperimentId = name.parse().map_err(|_| head.error(ParseErrorKind::UnknownIdentifier(name.clone())))?;
        self.expect('{')?;
        let mut fields: BTreeMap<String, (Value, Pos)> = BTreeMap::new();
        while !self.eat('}') {
            if self.at_end() {
                return Err(self.unexpected("`}`"));
            }
            let (key, pos) = self.ident()?;
            if !allowed_keys(id).contains(&key.as_str()) {
                return Err(pos.error(ParseErrorKind::UnknownIdentifier(key)));
            }
            self.expect('=')?;
            let value = self.value(&key, pos)?;
            if fields.insert(key.clone(), (value, pos)).is_some() {
                return Err(pos.error(ParseErrorKind::Duplicate(key)));
            }
        }
        build_spec(id, head, fields)
    }
}

fn build_spec(id: ExperimentId, head: Pos, mut fields: BTreeMap<String, (Value, Pos)>) -> Result<InequalitySpec, ParseError> {
    use ExperimentId::*;
    let mut real = |key: &str| match fields.remove(key) {
        Some((Value::Real(v), pos)) => Some((v, pos)),
        _ => None,
    };
    let p1 = real("p1");
    let p2 = real("p2");
    let p = real("p");
    let q = real("q");
    let r = real("r");
    let q1 = real("q1");
    let q2 = real("q2");
    let half_length = real("L");

    let relation = |pos: Pos, msg: String| pos.error(ParseErrorKind::ExponentRelation(msg));
    let exponents = match id {
        E1 | E2 | E5 | E6 | E7 => {
            let (p1, p2) = match (p1, p2, id) {
                (Some(a), Some(b), _) => (a, b),
                (None, None, E5) => ((1.0, head), (1.0, head)),
                (None, _, _) => return Err(head.error(ParseErrorKind::Missing("p1".into()))),
                (_, None, _) => return Err(head.error(ParseErrorKind::Missing("p2".into()))),
            };
            let triple = ExponentTriple::new(p1.0, p2.0)
                .map_err(|e| p1.1.error(ParseErrorKind::Invalid(e.to_string())))?;
            if let Some((pv, pos)) = p {
                ExponentTriple::with_p(p1.0, p2.0, pv).map_err(|_| {
                    relation(pos, format!("1/p = 1/{} but 1/p1 + 1/p2 = 1/{} + 1/{} = {}", pv, p1.0, p2.0, 1.0 / p1.0 + 1.0 / p2.0))
                })?;
            }
            if id == E5 && (p1.0 != 1.0 || p2.0 != 1.0) {
                return Err(relation(p1.1, "the endpoint experiment is fixed at (1, 1; 1/2)".into()));
            }
            Exponents::Triple(triple)
        }
        E3 | E4 => {
            let (q, pos) = q.ok_or_else(|| head.error(ParseErrorKind::Missing("q".into())))?;
            if !(q.is_finite() && q >= 1.0) {
                return Err(relation(pos, format!("q must be at least 1, got {q}")));
            }
            if let Some((r, pos)) = r {
                if !(r > 1.0 && r.is_finite()) {
                    return Err(relation(pos, format!("r must exceed 1, got {r}")));
                }
            }
            Exponents::Single { q, r: r.map(|x| x.0) }
        }
    };
    let lorentz = match id {
        E6 => {
            let (a, pos) = q1.ok_or_else(|| head.error(ParseErrorKind::Missing("q1".into())))?;
            let (b, _) = q2.ok_or_else(|| head.error(ParseErrorKind::Missing("q2".into())))?;
            if !(a >= 1.0 && b >= 1.0 && 1.0 / a + 1.0 / b < 1.0) {
                return Err(relation(pos, format!("need q1, q2 >= 1 and 1/q1 + 1/q2 < 1, got q1 = {a}, q2 = {b}")));
            }
            Some((a, b))
        }
        E5 => Some((1.0, 1.0)),
        _ => None,
    };

    let mut int = |key: &str| match fields.remove(key) {
        Some((Value::Int(v), pos)) => Some((v, pos)),
        _ => None,
    };
    let seed = int("seed").map_or(0, |s| s.0);
    let mut grid = GridSpec::default();
    if let Some((n, pos)) = int("N") {
        grid.n = n as usize;
        grid.build().map_err(|e| pos.error(ParseErrorKind::Invalid(e.to_string())))?;
    }
    if let Some((l, pos)) = half_length {
        grid.half_length = l;
        grid.build().map_err(|e| pos.error(ParseErrorKind::Invalid(e.to_string())))?;
    }

    let mut operator = |key: &str, default: OperatorHandle| match fields.remove(key) {
        Some((Value::Operator(t), _)) => t,
        _ => default,
    };
    let operators = match id {
        E1 | E7 => vec![operator("t1", OperatorHandle::Hilbert), operator("t2", OperatorHandle::Hilbert)],
        E2 => vec![operator("t1", OperatorHandle::Maximal), operator("t2", OperatorHandle::Maximal)],
        E3 | E4 => {
            let t = operator("t", OperatorHandle::Hilbert);
            if !matches!(t, OperatorHandle::Id | OperatorHandle::Hilbert) {
                return Err(head.error(ParseErrorKind::Invalid(format!("the sharp operator is built over id or hilbert, not {t}"))));
            }
            vec![t]
        }
        E5 | E6 => Vec::new(),
    };

    let family = match fields.remove("family") {
        Some((Value::Family(f), _)) => f,
        _ if id == E5 => FamilySpec { kind: FamilyKind::Indicators, count: 25 },
        _ => FamilySpec { kind: FamilyKind::Mixed, count: 16 },
    };
    let measure = match fields.remove("mu") {
        Some((Value::Measure(m), _)) => Some(m),
        _ if matches!(id, E5 | E6) => Some(MeasureSpec::Dirac(0.0, 0.0)),
        _ => None,
    };
    let p0 = match fields.remove("p0") {
        Some((Value::Reals(v), pos)) => {
            if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
                return Err(pos.error(ParseErrorKind::Invalid(format!("p0 must be positive, got {bad}"))));
            }
            v
        }
        _ if id == E3 => vec![0.5, 1.0, 2.0],
        _ => Vec::new(),
    };

    let weight_keys: &[&str] = match id {
        E3 => &["u", "v", "w"],
        E4 => &["u", "v"],
        _ => &["w1", "w2"],
    };
    let mut weights = BTreeMap::new();
    let mut lengths = Vec::new();
    for key in weight_keys {
        let list = match fields.remove(*key) {
            Some((Value::Weights(list), pos)) => {
                lengths.push((list.len(), pos));
                list
            }
            _ => vec![WeightExpr::One],
        };
        weights.insert(key.to_string(), list);
    }
    // u and v are zipped into configurations; w (E3 hypothesis) is its own list
    let zipped: Vec<_> = lengths.iter().filter(|(n, _)| *n > 1).collect();
    if id != E3 {
        if let Some((n, pos)) = zipped.iter().find(|(n, _)| *n != zipped[0].0) {
            return Err(pos.error(ParseErrorKind::Invalid(format!("weight lists of lengths {} and {n} cannot be zipped", zipped[0].0))));
        }
    } else if weights["u"].len() > 1 && weights["v"].len() > 1 && weights["u"].len() != weights["v"].len() {
        return Err(head.error(ParseErrorKind::Invalid("u and v lists must have equal lengths".into())));
    }
    debug_assert!(fields.is_empty(), "every allowed key is consumed");

    Ok(InequalitySpec { name: id, operators, exponents, lorentz, weights, family, measure, p0, grid, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_block() {
        let s = parse_spec("e1 { p1=2 p2=2 w1=power(1) w2=one family=indicators(16) }").unwrap();
        assert_eq!(s.name, ExperimentId::E1);
        assert_eq!(s.triple().unwrap().p, 1.0);
        assert_eq!(s.weights["w1"], vec![WeightExpr::Power(1.0)]);
        assert_eq!(s.weights["w2"], vec![WeightExpr::One]);
        assert_eq!(s.family, FamilySpec { kind: FamilyKind::Indicators, count: 16 });
        assert_eq!(s.operators, vec![OperatorHandle::Hilbert; 2]);
        assert_eq!(s.grid, GridSpec::default());
    }

    fn kind_at(text: &str) -> (usize, usize, ParseErrorKind) {
        let e = parse_spec(text).unwrap_err();
        (e.line, e.column, e.kind)
    }

    #[test]
    fn relation_violation_points_at_p() {
        let (line, col, kind) = kind_at("e1 {\n  p1=2 p2=3 p=1\n}");
        assert_eq!((line, col), (2, 13));
        assert!(matches!(kind, ParseErrorKind::ExponentRelation(_)));
    }

    #[test]
    fn non_integrable_power() {
        let (_, col, kind) = kind_at("e1 { p1=2 p2=2 w1=power(-2) }");
        assert_eq!(col, 19);
        assert!(matches!(kind, ParseErrorKind::InvalidWeight(ref m) if m.contains("locally integrable")));
    }

    #[test]
    fn malformed_literal_and_unknown_identifier() {
        assert!(matches!(kind_at("e1 { p1=2.5.1 p2=2 }").2, ParseErrorKind::MalformedReal(ref s) if s == "2.5.1"));
        assert!(matches!(kind_at("e1 { p1=2 p2=2x }").2, ParseErrorKind::MalformedReal(_)));
        assert!(matches!(kind_at("e1 { p1=2 p2=2 w1=powr(1) }").2, ParseErrorKind::UnknownIdentifier(ref s) if s == "powr"));
        assert!(matches!(kind_at("e1 { p1=2 p2=2 colour=2 }").2, ParseErrorKind::UnknownIdentifier(_)));
        assert!(matches!(kind_at("e9 { }").2, ParseErrorKind::UnknownIdentifier(_)));
        assert!(matches!(kind_at("e1 { p1=2 }").2, ParseErrorKind::Missing(_)));
        assert!(matches!(kind_at("e1 { p1=2 p2=2 p1=3 }").2, ParseErrorKind::Duplicate(_)));
    }

    #[test]
    fn weight_grammar() {
        let s = parse_spec(
            "# sweep\ne4 { q=2 u=[one, power(0.5)*a1max(step(3,4),-0.5)^2, hatq2(one, indicator(0,1), bump(0,1), 0.5, 2)]\n v=a1max(indicator(0,1),-0.5) t=h }",
        )
        .unwrap();
        let u = &s.weights["u"];
        assert_eq!(u.len(), 3);
        assert_eq!(
            u[1],
            WeightExpr::Mul(
                Box::new(WeightExpr::Power(0.5)),
                Box::new(WeightExpr::Pow(Box::new(WeightExpr::A1Max(FuncExpr::Step { seed: 3, count: 4 }, -0.5)), 2.0))
            )
        );
        assert!(matches!(u[2], WeightExpr::HatQ2 { .. }));
        assert_eq!(s.single(), Some((2.0, None)));
        // display round-trips through the parser
        let text = format!("e4 {{ q=2 u={} }}", u[2]);
        assert_eq!(parse_spec(&text).unwrap().weights["u"][0], u[2]);
    }

    #[test]
    fn lone_weights() {
        assert_eq!(parse_weight("power(0.5)^2").unwrap(), WeightExpr::Pow(Box::new(WeightExpr::Power(0.5)), 2.0));
        assert!(parse_weight("power(0.5) one").is_err());
        assert!(matches!(parse_weight("power(-1)").unwrap_err().kind, ParseErrorKind::InvalidWeight(_)));
    }

    #[test]
    fn lorentz_exponents_checked() {
        assert!(parse_spec("e6 { p1=3 p2=3 q1=3 q2=3 }").is_ok());
        assert!(matches!(kind_at("e6 { p1=3 p2=3 q1=2 q2=2 }").2, ParseErrorKind::ExponentRelation(_)));
        assert!(matches!(kind_at("e5 { p1=2 p2=2 }").2, ParseErrorKind::ExponentRelation(_)));
        let e5 = parse_spec("e5 { w1=power(-0.25) mu=random(4) }").unwrap();
        assert_eq!(e5.triple().unwrap().p, 0.5);
        assert_eq!(e5.measure, Some(MeasureSpec::Random(4)));
        assert!(matches!(kind_at("e5 { mu=random(9) }").2, ParseErrorKind::Invalid(_)));
    }

    #[test]
    fn grid_and_lists() {
        let s = parse_config("e2 { p1=2 p2=2 N=1024 seed=9 }\ne3 { q=2 p0=[1, 2] w=[one, power(0.5)] }").unwrap();
        assert_eq!(s[0].grid.n, 1024);
        assert_eq!(s[0].seed, 9);
        assert_eq!(s[1].p0, vec![1.0, 2.0]);
        assert_eq!(s[1].weights["w"].len(), 2);
        assert!(matches!(kind_at("e2 { p1=2 p2=2 N=1000 }").2, ParseErrorKind::Invalid(_)));
        assert!(matches!(
            kind_at("e1 { p1=2 p2=2 w1=[one, one] w2=[one, one, one] }").2,
            ParseErrorKind::Invalid(_)
        ));
    }

    #[test]
    fn measures_build_normalized() {
        let m = MeasureSpec::Random(4).build(3).unwrap();
        assert_eq!(m.atoms().len(), 4);
        assert!(m.is_normalized());
        let m = MeasureSpec::Atoms(vec![(0.0, 0.0, 2.0, 0.0), (1.0, -1.0, 0.0, 2.0)]).build(0).unwrap();
        assert!(m.is_normalized());
    }
}
