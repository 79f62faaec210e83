//! Boolean presence conditions over feature names.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::FlcError;

/// A presence condition. `True` is the condition of top-level code.
///
/// Values built through [`FeatureExpr::and`] / [`FeatureExpr::or`] are kept
/// flattened: an `And` never directly contains an `And`, an `Or` never
/// directly contains an `Or`, and neither is empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureExpr {
    True,
    Atom(String),
    Not(Box<FeatureExpr>),
    And(Vec<FeatureExpr>),
    Or(Vec<FeatureExpr>),
}

pub fn is_feature_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

impl FeatureExpr {
    pub fn atom(name: impl Into<String>) -> FeatureExpr {
        let name = name.into();
        debug_assert!(is_feature_name(&name), "invalid feature name {name:?}");
        FeatureExpr::Atom(name)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: FeatureExpr) -> FeatureExpr {
        match inner {
            FeatureExpr::Not(e) => *e,
            e => FeatureExpr::Not(Box::new(e)),
        }
    }

    /// Conjunction, flattened. `True` operands vanish; an empty conjunction is `True`.
    pub fn and(parts: impl IntoIterator<Item = FeatureExpr>) -> FeatureExpr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                FeatureExpr::True => {}
                FeatureExpr::And(inner) => out.extend(inner),
                e => out.push(e),
            }
        }
        match out.len() {
            0 => FeatureExpr::True,
            1 => out.pop().unwrap(),
            _ => FeatureExpr::And(out),
        }
    }

    /// Disjunction, flattened. A `True` operand makes the whole disjunction `True`.
    pub fn or(parts: impl IntoIterator<Item = FeatureExpr>) -> FeatureExpr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                FeatureExpr::True => return FeatureExpr::True,
                FeatureExpr::Or(inner) => out.extend(inner),
                e => out.push(e),
            }
        }
        match out.len() {
            0 => FeatureExpr::True,
            1 => out.pop().unwrap(),
            _ => FeatureExpr::Or(out),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, FeatureExpr::True)
    }

    pub fn eval(&self, enabled: &BTreeSet<String>) -> bool {
        match self {
            FeatureExpr::True => true,
            FeatureExpr::Atom(f) => enabled.contains(f),
            FeatureExpr::Not(e) => !e.eval(enabled),
            FeatureExpr::And(es) => es.iter().all(|e| e.eval(enabled)),
            FeatureExpr::Or(es) => es.iter().any(|e| e.eval(enabled)),
        }
    }

    pub fn atoms(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            FeatureExpr::True => {}
            FeatureExpr::Atom(f) => {
                out.insert(f);
            }
            FeatureExpr::Not(e) => e.collect_atoms(out),
            FeatureExpr::And(es) | FeatureExpr::Or(es) => es.iter().for_each(|e| e.collect_atoms(out)),
        }
    }

    /// Flattened form with `And`/`Or` operands sorted by their compact text and
    /// deduplicated. Two expressions are structurally equal iff their canonical
    /// forms are equal.
    pub fn canonical(&self) -> FeatureExpr {
        match self {
            FeatureExpr::True | FeatureExpr::Atom(_) => self.clone(),
            FeatureExpr::Not(e) => FeatureExpr::not(e.canonical()),
            FeatureExpr::And(es) => {
                let flat = FeatureExpr::and(es.iter().map(|e| e.canonical()));
                sort_operands(flat)
            }
            FeatureExpr::Or(es) => {
                let flat = FeatureExpr::or(es.iter().map(|e| e.canonical()));
                sort_operands(flat)
            }
        }
    }

    pub fn structurally_eq(&self, other: &FeatureExpr) -> bool {
        self.canonical() == other.canonical()
    }

    /// Directive syntax without spaces, e.g. `A&&!B`.
    pub fn compact(&self) -> String {
        let mut s = String::new();
        self.render(&mut s, false, 0);
        s
    }

    fn render(&self, out: &mut String, spaced: bool, parent_prec: u8) {
        let (op, prec) = match self {
            FeatureExpr::True => {
                out.push('1');
                return;
            }
            FeatureExpr::Atom(f) => {
                out.push_str(f);
                return;
            }
            FeatureExpr::Not(e) => {
                out.push('!');
                e.render(out, spaced, 3);
                return;
            }
            FeatureExpr::And(_) => ("&&", 2),
            FeatureExpr::Or(_) => ("||", 1),
        };
        let es = match self {
            FeatureExpr::And(es) | FeatureExpr::Or(es) => es,
            _ => unreachable!(),
        };
        let paren = prec < parent_prec;
        if paren {
            out.push('(');
        }
        for (i, e) in es.iter().enumerate() {
            if i > 0 {
                if spaced {
                    out.push(' ');
                    out.push_str(op);
                    out.push(' ');
                } else {
                    out.push_str(op);
                }
            }
            // Same-precedence children only occur when unflattened; parenthesise them.
            e.render(out, spaced, prec + 1);
        }
        if paren {
            out.push(')');
        }
    }

    /// Parses directive syntax: identifiers, `1`/`0`, `!`, `&&`, `||`, parentheses.
    pub fn parse(text: &str) -> Result<FeatureExpr, FlcError> {
        let mut p = ExprParser {
            src: text.as_bytes(),
            pos: 0,
        };
        let e = p.parse_or()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }
}

fn sort_operands(e: FeatureExpr) -> FeatureExpr {
    match e {
        FeatureExpr::And(mut es) => {
            es.sort_by_cached_key(|x| x.compact());
            es.dedup();
            FeatureExpr::and(es)
        }
        FeatureExpr::Or(mut es) => {
            es.sort_by_cached_key(|x| x.compact());
            es.dedup();
            FeatureExpr::or(es)
        }
        e => e,
    }
}

impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.render(&mut s, true, 0);
        f.write_str(&s)
    }
}

impl Serialize for FeatureExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FeatureExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        FeatureExpr::parse(&s).map_err(serde::de::Error::custom)
    }
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn error(&self, msg: &str) -> FlcError {
        FlcError::FeatureExpr {
            text: String::from_utf8_lossy(self.src).into_owned(),
            column: self.pos + 1,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn parse_or(&mut self) -> Result<FeatureExpr, FlcError> {
        let mut parts = vec![self.parse_and()?];
        while self.eat("||") {
            parts.push(self.parse_and()?);
        }
        Ok(FeatureExpr::or(parts))
    }

    fn parse_and(&mut self) -> Result<FeatureExpr, FlcError> {
        let mut parts = vec![self.parse_unary()?];
        while self.eat("&&") {
            parts.push(self.parse_unary()?);
        }
        Ok(FeatureExpr::and(parts))
    }

    fn parse_unary(&mut self) -> Result<FeatureExpr, FlcError> {
        if self.eat("!") {
            return Ok(FeatureExpr::not(self.parse_unary()?));
        }
        if self.eat("(") {
            let e = self.parse_or()?;
            if !self.eat(")") {
                return Err(self.error("expected `)`"));
            }
            return Ok(e);
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos] == b'_' || self.src[self.pos].is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match word {
            "" => Err(self.error("expected a feature name")),
            "1" => Ok(FeatureExpr::True),
            "0" => Ok(FeatureExpr::not(FeatureExpr::True)),
            w if is_feature_name(w) => Ok(FeatureExpr::Atom(w.to_string())),
            _ => {
                self.pos = start;
                Err(self.error("invalid feature name"))
            }
        }
    }
}
