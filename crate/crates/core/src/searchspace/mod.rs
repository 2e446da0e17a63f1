//! Declarative component registry and its hierarchical task network.
//!
//! A registry lists components; each provides one or more interfaces,
//! requires named slots typed by interface, and declares hyper-parameters.
//! Forward decomposition of the root task `ResolveInterface(root, target)`
//! (see [`graph`]) induces a finite search tree whose leaves materialize to
//! [`ComponentInstance`] trees.

mod graph;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::params::ParamValue;

pub use graph::{
    enumerate_leaves, expand_leaves, random_completion, root_node, successors, CompletionMode, Decision, SearchNode,
    SlotPath, Task, DEFAULT_ENUMERATION_CAP,
};

/// Root interface of multi-label search spaces.
pub const ROOT_INTERFACE: &str = "MLC";

pub const DEFAULT_MAX_DEPTH: usize = 5;
pub const DEFAULT_MAX_RECURSION: usize = 3;
pub const DEFAULT_GRANULARITY: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("no component provides required interface '{0}'")]
    UnsatisfiableInterface(String),
    #[error("duplicate component '{0}'")]
    DuplicateComponent(String),
    #[error("malformed parameter '{0}': {1}")]
    MalformedParam(String, String),
    #[error("malformed registry: {0}")]
    Malformed(String),
    #[error("unknown interface '{0}'")]
    UnknownInterface(String),
    #[error("node has no open tasks")]
    LeafNode,
    #[error("node still has open tasks")]
    NotALeaf,
    #[error("no completion within the depth bound")]
    DeadEnd,
    #[error("more than {0} leaves")]
    ExplosionGuard(usize),
}

/// Interface list accepting either a single name or an array in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Provides {
    One(String),
    Many(Vec<String>),
}

impl From<Provides> for Vec<String> {
    fn from(p: Provides) -> Self {
        match p {
            Provides::One(s) => vec![s],
            Provides::Many(v) => v,
        }
    }
}

fn provides_from_json<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    Provides::deserialize(d).map(Into::into)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDef {
    pub slot: String,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamKind {
    Categorical {
        values: Vec<ParamValue>,
    },
    /// Interval `[min, max]`, halved in the search graph down to width
    /// `g * (max - min)` (measured in log space when `log`).
    Numeric {
        min: f64,
        max: f64,
        #[serde(default)]
        log: bool,
        #[serde(default = "default_granularity")]
        g: f64,
        /// Materialized values are rounded to integers.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        integer: bool,
    },
}

fn default_granularity() -> f64 {
    DEFAULT_GRANULARITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
}

impl ParamDef {
    pub fn categorical(name: &str, values: Vec<ParamValue>) -> Self {
        ParamDef {
            name: name.into(),
            kind: ParamKind::Categorical { values },
        }
    }

    pub fn numeric(name: &str, min: f64, max: f64, log: bool, g: f64) -> Self {
        ParamDef {
            name: name.into(),
            kind: ParamKind::Numeric {
                min,
                max,
                log,
                g,
                integer: false,
            },
        }
    }

    /// Value taken when a leaf leaves the parameter unfixed: the first
    /// categorical value, or the midpoint of the range on its own scale.
    pub fn default_value(&self) -> ParamValue {
        match &self.kind {
            ParamKind::Categorical { values } => values[0].clone(),
            ParamKind::Numeric {
                min, max, log, integer, ..
            } => numeric_value(midpoint(*min, *max, *log), *integer),
        }
    }

    fn validate(&self) -> Result<(), SearchError> {
        let bad = |why: &str| Err(SearchError::MalformedParam(self.name.clone(), why.into()));
        match &self.kind {
            ParamKind::Categorical { values } => {
                if values.is_empty() {
                    return bad("no values");
                }
                let distinct: HashSet<String> = values.iter().map(|v| format!("{v:?}")).collect();
                if distinct.len() != values.len() {
                    return bad("duplicate values");
                }
            }
            ParamKind::Numeric { min, max, log, g, .. } => {
                if !(min.is_finite() && max.is_finite()) || min >= max {
                    return bad("need finite min < max");
                }
                if *log && *min <= 0.0 {
                    return bad("log scale needs min > 0");
                }
                if !(*g > 0.0 && *g <= 1.0) {
                    return bad("granularity outside (0, 1]");
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn midpoint(lo: f64, hi: f64, log: bool) -> f64 {
    if log {
        (lo * hi).sqrt()
    } else {
        lo + (hi - lo) / 2.0
    }
}

pub(crate) fn numeric_value(v: f64, integer: bool) -> ParamValue {
    if integer {
        ParamValue::Int(v.round() as i64)
    } else {
        ParamValue::Float(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDef {
    pub name: String,
    #[serde(deserialize_with = "provides_from_json")]
    pub provides: Vec<String>,
    #[serde(default)]
    pub requires: Vec<SlotDef>,
    #[serde(default)]
    pub params: Vec<ParamDef>,
}

impl ComponentDef {
    pub fn new(name: &str, provides: &[&str]) -> Self {
        ComponentDef {
            name: name.into(),
            provides: provides.iter().map(|s| s.to_string()).collect(),
            requires: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn slot(mut self, slot: &str, interface: &str) -> Self {
        self.requires.push(SlotDef {
            slot: slot.into(),
            interface: interface.into(),
        });
        self
    }

    pub fn param(mut self, p: ParamDef) -> Self {
        self.params.push(p);
        self
    }
}

/// "Never place `inner` anywhere below `outer`."
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForbidRule {
    pub outer: String,
    pub inner: String,
}

/// A validated component registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRegistry {
    pub components: Vec<ComponentDef>,
    #[serde(default)]
    pub forbid: Vec<ForbidRule>,
    /// Longest slot path (root component at depth 0).
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
    /// Most occurrences of one component on a root-to-leaf path; bounds
    /// recursive pipeline chains.
    #[serde(default = "default_max_recursion")]
    pub max_recursion: usize,
}

fn default_max_depth() -> usize {
    DEFAULT_MAX_DEPTH
}

fn default_max_recursion() -> usize {
    DEFAULT_MAX_RECURSION
}

impl ComponentRegistry {
    /// Validates a registry built in code.
    pub fn new(components: Vec<ComponentDef>) -> Result<Self, SearchError> {
        let reg = ComponentRegistry {
            components,
            forbid: Vec::new(),
            max_depth: DEFAULT_MAX_DEPTH,
            max_recursion: DEFAULT_MAX_RECURSION,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn with_limits(mut self, max_depth: usize, max_recursion: usize) -> Self {
        self.max_depth = max_depth;
        self.max_recursion = max_recursion;
        self
    }

    pub fn with_forbid(mut self, outer: &str, inner: &str) -> Self {
        self.forbid.push(ForbidRule {
            outer: outer.into(),
            inner: inner.into(),
        });
        self
    }

    fn validate(&self) -> Result<(), SearchError> {
        let mut names = HashSet::new();
        for c in &self.components {
            if !names.insert(c.name.as_str()) {
                return Err(SearchError::DuplicateComponent(c.name.clone()));
            }
            if c.provides.is_empty() {
                return Err(SearchError::Malformed(format!("'{}' provides nothing", c.name)));
            }
            let mut slots = HashSet::new();
            for s in &c.requires {
                if !slots.insert(s.slot.as_str()) {
                    return Err(SearchError::Malformed(format!(
                        "'{}' repeats slot '{}'",
                        c.name, s.slot
                    )));
                }
            }
            let mut params = HashSet::new();
            for p in &c.params {
                if !params.insert(p.name.as_str()) {
                    return Err(SearchError::MalformedParam(p.name.clone(), "declared twice".into()));
                }
                p.validate()?;
            }
        }
        for c in &self.components {
            for s in &c.requires {
                if self.providers(&s.interface).is_empty() {
                    return Err(SearchError::UnsatisfiableInterface(s.interface.clone()));
                }
            }
        }
        if self.max_recursion == 0 {
            return Err(SearchError::Malformed("max_recursion must be positive".into()));
        }
        Ok(())
    }

    pub fn component(&self, name: &str) -> Option<&ComponentDef> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Providers of `interface` in declaration order.
    pub fn providers(&self, interface: &str) -> Vec<&ComponentDef> {
        self.components
            .iter()
            .filter(|c| c.provides.iter().any(|p| p == interface))
            .collect()
    }

    /// Every interface that is provided or required.
    pub fn interfaces(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for c in &self.components {
            out.extend(c.provides.iter().cloned());
            out.extend(c.requires.iter().map(|s| s.interface.clone()));
        }
        out
    }

    pub fn has_interface(&self, interface: &str) -> bool {
        self.components
            .iter()
            .any(|c| c.provides.iter().any(|p| p == interface))
    }

    /// Whether `component` may be placed at `depth` under `ancestors`
    /// (outermost first) and completed from there.
    pub(crate) fn admits(&self, component: &ComponentDef, depth: usize, ancestors: &[&str]) -> bool {
        if depth > self.max_depth {
            return false;
        }
        let repeats = ancestors.iter().filter(|a| **a == component.name).count();
        if repeats + 1 > self.max_recursion {
            return false;
        }
        if self
            .forbid
            .iter()
            .any(|r| r.inner == component.name && ancestors.contains(&r.outer.as_str()))
        {
            return false;
        }
        let mut below = ancestors.to_vec();
        below.push(&component.name);
        component.requires.iter().all(|slot| {
            self.providers(&slot.interface)
                .into_iter()
                .any(|p| self.admits(p, depth + 1, &below))
        })
    }

    /// Whether some finite derivation exists for `interface` at the root.
    pub fn resolvable(&self, interface: &str) -> bool {
        self.providers(interface).into_iter().any(|p| self.admits(p, 0, &[]))
    }

    /// GraphViz digraph: one node per component, one edge per
    /// (component, slot, provider) triple, labelled with the slot.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph registry {\n  rankdir=TB;\n");
        for c in &self.components {
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\\n[{}]\"];",
                c.name,
                c.name,
                c.provides.join(", ")
            );
        }
        for c in &self.components {
            for s in &c.requires {
                for p in self.providers(&s.interface) {
                    let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", c.name, p.name, s.slot);
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Number of edges in [`Self::to_dot`].
    pub fn edge_count(&self) -> usize {
        self.components
            .iter()
            .flat_map(|c| &c.requires)
            .map(|s| self.providers(&s.interface).len())
            .sum()
    }
}

/// Parses and validates a registry document.
pub fn load_registry(document: &str) -> Result<ComponentRegistry, SearchError> {
    let reg: ComponentRegistry = serde_json::from_str(document).map_err(|e| SearchError::Malformed(e.to_string()))?;
    reg.validate()?;
    Ok(reg)
}

pub fn export_dag_dot(registry: &ComponentRegistry) -> String {
    registry.to_dot()
}

const BUILTIN: &str = include_str!("builtin.json");

/// The default multi-label search space: br, libre, cc, ecc and lp over the
/// single-label learners, optionally behind a chain of preprocessors.
pub fn builtin_registry() -> ComponentRegistry {
    load_registry(BUILTIN).expect("bundled registry is valid")
}

/// The bundled registry document.
pub fn builtin_registry_json() -> &'static str {
    BUILTIN
}

/// A fully specified component tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentInstance {
    pub component: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub children: BTreeMap<String, ComponentInstance>,
}

impl ComponentInstance {
    pub fn new(component: &str) -> Self {
        ComponentInstance {
            component: component.into(),
            params: BTreeMap::new(),
            children: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(name.into(), value.into());
        self
    }

    pub fn with_child(mut self, slot: &str, child: ComponentInstance) -> Self {
        self.children.insert(slot.into(), child);
        self
    }

    /// Node count of the tree.
    pub fn size(&self) -> usize {
        1 + self.children.values().map(ComponentInstance::size).sum::<usize>()
    }

    /// Component names in pre-order.
    pub fn components(&self) -> Vec<&str> {
        let mut out = vec![self.component.as_str()];
        for c in self.children.values() {
            out.extend(c.components());
        }
        out
    }

    /// Canonical JSON text, usable as a cache or set key.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("instances serialize")
    }

    /// Checks the tree against the registry: known components, filled
    /// slots with matching interfaces, parameter values inside domains.
    pub fn validate(&self, registry: &ComponentRegistry) -> Result<(), SearchError> {
        let def = registry
            .component(&self.component)
            .ok_or_else(|| SearchError::Malformed(format!("unknown component '{}'", self.component)))?;
        for p in &def.params {
            let Some(v) = self.params.get(&p.name) else {
                return Err(SearchError::MalformedParam(p.name.clone(), "missing".into()));
            };
            let ok = match &p.kind {
                ParamKind::Categorical { values } => values.contains(v),
                ParamKind::Numeric { min, max, integer, .. } => v.as_f64().is_some_and(|x| {
                    let (lo, hi) = if *integer {
                        (min.round(), max.round())
                    } else {
                        (*min, *max)
                    };
                    x >= lo && x <= hi
                }),
            };
            if !ok {
                return Err(SearchError::MalformedParam(
                    p.name.clone(),
                    format!("value {v} out of domain"),
                ));
            }
        }
        if self.children.len() != def.requires.len() {
            return Err(SearchError::Malformed(format!(
                "'{}' has unfilled or extra slots",
                self.component
            )));
        }
        for s in &def.requires {
            let child = self
                .children
                .get(&s.slot)
                .ok_or_else(|| SearchError::Malformed(format!("slot '{}' unfilled", s.slot)))?;
            let child_def = registry
                .component(&child.component)
                .ok_or_else(|| SearchError::Malformed(format!("unknown component '{}'", child.component)))?;
            if !child_def.provides.contains(&s.interface) {
                return Err(SearchError::Malformed(format!(
                    "'{}' does not provide '{}'",
                    child.component, s.interface
                )));
            }
            child.validate(registry)?;
        }
        Ok(())
    }
}
