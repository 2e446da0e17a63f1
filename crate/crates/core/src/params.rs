//! Hyper-parameter values and declared domains.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A single hyper-parameter assignment as it appears in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            _ => None,
        }
    }

    /// Integral values only; `4.0` is accepted as `4`.
    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(i) => Some(i),
            ParamValue::Float(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => Some(f as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

pub type ParamMap = BTreeMap<String, ParamValue>;

/// Domain of one learner or preprocessor hyper-parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Real { min: f64, max: f64, log: bool },
    Int { min: i64, max: i64 },
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDecl {
    pub name: &'static str,
    pub domain: Domain,
    pub default: DefaultValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefaultValue {
    Real(f64),
    Int(i64),
    Choice(&'static str),
}

impl DefaultValue {
    pub fn to_value(self) -> ParamValue {
        match self {
            DefaultValue::Real(v) => ParamValue::Float(v),
            DefaultValue::Int(v) => ParamValue::Int(v),
            DefaultValue::Choice(v) => ParamValue::Text(v.to_string()),
        }
    }
}

impl ParamDecl {
    /// Whether `value` is a legal assignment for this parameter.
    pub fn accepts(&self, value: &ParamValue) -> bool {
        match self.domain {
            Domain::Real { min, max, .. } => value.as_f64().is_some_and(|v| v.is_finite() && v >= min && v <= max),
            Domain::Int { min, max } => value.as_i64().is_some_and(|v| v >= min && v <= max),
            Domain::Choice(options) => value.as_str().is_some_and(|v| options.contains(&v)),
        }
    }
}

/// Checks `params` against `decls` and fills in defaults. Unknown names and
/// out-of-domain values are reported by parameter name.
pub fn resolve(decls: &[ParamDecl], params: &ParamMap) -> Result<ParamMap, String> {
    if let Some(unknown) = params.keys().find(|k| !decls.iter().any(|d| d.name == k.as_str())) {
        return Err(unknown.clone());
    }
    let mut out = ParamMap::new();
    for decl in decls {
        let value = match params.get(decl.name) {
            Some(v) if decl.accepts(v) => v.clone(),
            Some(_) => return Err(decl.name.to_string()),
            None => decl.default.to_value(),
        };
        out.insert(decl.name.to_string(), value);
    }
    Ok(out)
}
