//! Attribute predicates, conjunctive filters and content matching.
//!
//! Text syntax, one predicate per comma-separated item:
//!
//! ```text
//! symbol = YHOO, price between 10 50, volume >= 1000
//! ```
//!
//! Operators are `=`, `!=`, `<`, `<=`, `>`, `>=` and `between lo hi`
//! (inclusive). A value that parses as a number is numeric, anything else is a
//! string; wrap a value in double quotes to force a string.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("filter has no predicates")]
    Empty,
    #[error("cannot parse predicate `{0}`")]
    Syntax(String),
    #[error("`between` needs lo <= hi, got {0} and {1}")]
    InvertedRange(f64, f64),
    #[error("operator `{op}` needs a numeric value, got `{value}`")]
    NotNumeric { op: &'static str, value: String },
    #[error("attribute `{0}` compared as both number and string")]
    TypeMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Str(String),
}

impl Value {
    fn parse(raw: &str) -> Value {
        let raw = raw.trim();
        if raw.len() >= 2 && raw.starts_with('"') && raw.ends_with('"') {
            return Value::Str(raw[1..raw.len() - 1].to_string());
        }
        match raw.parse::<f64>() {
            Ok(x) if x.is_finite() => Value::Num(x),
            _ => Value::Str(raw.to_string()),
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self, Value::Num(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Str(s) if s.parse::<f64>().is_ok() || s.contains([',', ' ']) => {
                write!(f, "\"{s}\"")
            }
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

/// Notification content.
pub type Payload = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Constraint {
    Eq(Value),
    Ne(Value),
    Lt(f64),
    Le(f64),
    Gt(f64),
    Ge(f64),
    /// Inclusive on both ends.
    Between(f64, f64),
}

impl Constraint {
    fn is_numeric(&self) -> bool {
        match self {
            Constraint::Eq(v) | Constraint::Ne(v) => v.is_numeric(),
            _ => true,
        }
    }

    fn accepts(&self, value: &Value) -> bool {
        match (self, value) {
            (Constraint::Eq(want), v) => want == v,
            (Constraint::Ne(want), v) => want.is_numeric() == v.is_numeric() && want != v,
            (Constraint::Lt(b), Value::Num(x)) => x < b,
            (Constraint::Le(b), Value::Num(x)) => x <= b,
            (Constraint::Gt(b), Value::Num(x)) => x > b,
            (Constraint::Ge(b), Value::Num(x)) => x >= b,
            (Constraint::Between(lo, hi), Value::Num(x)) => lo <= x && x <= hi,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub attr: String,
    pub constraint: Constraint,
}

impl Predicate {
    pub fn new(attr: impl Into<String>, constraint: Constraint) -> Self {
        Predicate {
            attr: attr.into(),
            constraint,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = &self.attr;
        match &self.constraint {
            Constraint::Eq(v) => write!(f, "{a} = {v}"),
            Constraint::Ne(v) => write!(f, "{a} != {v}"),
            Constraint::Lt(x) => write!(f, "{a} < {x}"),
            Constraint::Le(x) => write!(f, "{a} <= {x}"),
            Constraint::Gt(x) => write!(f, "{a} > {x}"),
            Constraint::Ge(x) => write!(f, "{a} >= {x}"),
            Constraint::Between(lo, hi) => write!(f, "{a} between {lo} {hi}"),
        }
    }
}

impl FromStr for Predicate {
    type Err = FilterError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let syntax = || FilterError::Syntax(text.trim().to_string());
        let text = text.trim();
        let (attr, rest) = text.split_once(char::is_whitespace).ok_or_else(syntax)?;
        let rest = rest.trim_start();
        let (op, value) = rest.split_once(char::is_whitespace).ok_or_else(syntax)?;
        let value = value.trim();
        if value.is_empty() || attr.is_empty() {
            return Err(syntax());
        }
        let number = |op: &'static str| match Value::parse(value) {
            Value::Num(x) => Ok(x),
            Value::Str(s) => Err(FilterError::NotNumeric { op, value: s }),
        };
        let constraint = match op {
            "=" | "==" => Constraint::Eq(Value::parse(value)),
            "!=" => Constraint::Ne(Value::parse(value)),
            "<" => Constraint::Lt(number("<")?),
            "<=" => Constraint::Le(number("<=")?),
            ">" => Constraint::Gt(number(">")?),
            ">=" => Constraint::Ge(number(">=")?),
            "between" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                let [lo, hi] = parts.as_slice() else {
                    return Err(syntax());
                };
                let num = |s: &str| match Value::parse(s) {
                    Value::Num(x) => Ok(x),
                    Value::Str(s) => Err(FilterError::NotNumeric {
                        op: "between",
                        value: s,
                    }),
                };
                let (lo, hi) = (num(lo)?, num(hi)?);
                if lo > hi {
                    return Err(FilterError::InvertedRange(lo, hi));
                }
                Constraint::Between(lo, hi)
            }
            _ => return Err(syntax()),
        };
        Ok(Predicate::new(attr, constraint))
    }
}

/// A non-empty conjunction of predicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Filter(Vec<Predicate>);

impl Filter {
    pub fn new(predicates: Vec<Predicate>) -> Result<Self, FilterError> {
        if predicates.is_empty() {
            return Err(FilterError::Empty);
        }
        let filter = Filter(predicates);
        filter.typed_constraints()?;
        Ok(filter)
    }

    pub fn predicates(&self) -> &[Predicate] {
        &self.0
    }

    /// Closed-world matching: an attribute missing from the payload fails
    /// every predicate on it.
    pub fn matches(&self, payload: &Payload) -> bool {
        self.0.iter().all(|p| {
            payload
                .get(&p.attr)
                .is_some_and(|v| p.constraint.accepts(v))
        })
    }

    fn typed_constraints(&self) -> Result<BTreeMap<&str, (bool, Vec<&Constraint>)>, FilterError> {
        group(self.0.iter())
    }

    /// Whether some payload could satisfy both filters. Attributes named on
    /// only one side are constrained by that side alone.
    pub fn overlaps(&self, other: &Filter) -> Result<bool, FilterError> {
        let groups = group(self.0.iter().chain(other.0.iter()))?;
        Ok(groups.values().all(|(numeric, cs)| {
            if *numeric {
                numeric_satisfiable(cs)
            } else {
                string_satisfiable(cs)
            }
        }))
    }
}

fn group<'a>(
    preds: impl Iterator<Item = &'a Predicate>,
) -> Result<BTreeMap<&'a str, (bool, Vec<&'a Constraint>)>, FilterError> {
    let mut groups: BTreeMap<&str, (bool, Vec<&Constraint>)> = BTreeMap::new();
    for p in preds {
        let numeric = p.constraint.is_numeric();
        let entry = groups.entry(&p.attr).or_insert((numeric, Vec::new()));
        if entry.0 != numeric {
            return Err(FilterError::TypeMismatch(p.attr.clone()));
        }
        entry.1.push(&p.constraint);
    }
    Ok(groups)
}

fn numeric_satisfiable(cs: &[&Constraint]) -> bool {
    // (bound, inclusive)
    let mut lo = (f64::NEG_INFINITY, false);
    let mut hi = (f64::INFINITY, false);
    let mut excluded = Vec::new();
    let raise = |lo: &mut (f64, bool), x: f64, inc: bool| {
        if x > lo.0 || (x == lo.0 && !inc) {
            *lo = (x, inc);
        }
    };
    let lower = |hi: &mut (f64, bool), x: f64, inc: bool| {
        if x < hi.0 || (x == hi.0 && !inc) {
            *hi = (x, inc);
        }
    };
    for c in cs {
        match c {
            Constraint::Eq(Value::Num(x)) => {
                raise(&mut lo, *x, true);
                lower(&mut hi, *x, true);
            }
            Constraint::Ne(Value::Num(x)) => excluded.push(*x),
            Constraint::Lt(x) => lower(&mut hi, *x, false),
            Constraint::Le(x) => lower(&mut hi, *x, true),
            Constraint::Gt(x) => raise(&mut lo, *x, false),
            Constraint::Ge(x) => raise(&mut lo, *x, true),
            Constraint::Between(a, b) => {
                raise(&mut lo, *a, true);
                lower(&mut hi, *b, true);
            }
            Constraint::Eq(Value::Str(_)) | Constraint::Ne(Value::Str(_)) => {
                unreachable!("grouped by type")
            }
        }
    }
    if lo.0 < hi.0 {
        // A non-degenerate interval has more points than any finite exclusion list.
        true
    } else if lo.0 == hi.0 {
        lo.1 && hi.1 && !excluded.contains(&lo.0)
    } else {
        false
    }
}

fn string_satisfiable(cs: &[&Constraint]) -> bool {
    let mut pinned: Option<&Value> = None;
    let mut excluded = Vec::new();
    for c in cs {
        match c {
            Constraint::Eq(v) => match pinned {
                Some(p) if p != v => return false,
                _ => pinned = Some(v),
            },
            Constraint::Ne(v) => excluded.push(v),
            _ => unreachable!("grouped by type"),
        }
    }
    pinned.is_none_or(|p| !excluded.contains(&p))
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

fn split_items(text: &str) -> Vec<&str> {
    let mut items = Vec::new();
    let mut start = 0;
    let mut quoted = false;
    for (i, ch) in text.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            ',' if !quoted => {
                items.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&text[start..]);
    items
}

impl FromStr for Filter {
    type Err = FilterError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let preds = split_items(text)
            .into_iter()
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Predicate>, _>>()?;
        Filter::new(preds)
    }
}

impl TryFrom<String> for Filter {
    type Error = FilterError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Filter> for String {
    fn from(f: Filter) -> String {
        f.to_string()
    }
}
