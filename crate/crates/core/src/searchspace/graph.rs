//! Forward decomposition: search nodes, successor generation, random
//! completion, materialization and the enumeration oracle.
//!
//! A node is a plan prefix (decisions so far) plus a totally ordered task
//! network. Expansion always refines the first open task and replaces it in
//! place by its subtasks.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{midpoint, numeric_value, ComponentDef, ComponentInstance, ComponentRegistry, ParamKind, SearchError};
use crate::params::ParamValue;
use crate::seed::rng_from_seed;

pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// Slot names from the root component down; the root slot is empty.
pub type SlotPath = Vec<String>;

fn show_path(path: &SlotPath) -> String {
    if path.is_empty() {
        "root".into()
    } else {
        format!("root.{}", path.join("."))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    ResolveInterface {
        path: SlotPath,
        interface: String,
    },
    SetCategorical {
        path: SlotPath,
        param: String,
        values: Vec<ParamValue>,
    },
    /// `level` counts halvings so far; the interval is fixed once
    /// `2^-level <= g`.
    RefineNumeric {
        path: SlotPath,
        param: String,
        lo: f64,
        hi: f64,
        level: u32,
        log: bool,
        g: f64,
        integer: bool,
    },
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::ResolveInterface { path, interface } => write!(f, "resolve {} : {interface}", show_path(path)),
            Task::SetCategorical { path, param, .. } => write!(f, "set {}.{param}", show_path(path)),
            Task::RefineNumeric {
                path, param, lo, hi, ..
            } => {
                write!(f, "refine {}.{param} in [{lo}, {hi}]", show_path(path))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Component {
        path: SlotPath,
        component: String,
    },
    Value {
        path: SlotPath,
        param: String,
        value: ParamValue,
    },
    Interval {
        path: SlotPath,
        param: String,
        lo: f64,
        hi: f64,
    },
}

/// Plan prefix plus remaining task network. A leaf has no open tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub decisions: Vec<Decision>,
    pub tasks: Vec<Task>,
}

impl SearchNode {
    pub fn is_leaf(&self) -> bool {
        self.tasks.is_empty()
    }

    fn component_at(&self, path: &[String]) -> Option<&str> {
        self.decisions.iter().find_map(|d| match d {
            Decision::Component { path: p, component } if p == path => Some(component.as_str()),
            _ => None,
        })
    }

    /// Components on the path above `path`, outermost first.
    fn ancestors(&self, path: &[String]) -> Vec<&str> {
        (0..path.len()).filter_map(|k| self.component_at(&path[..k])).collect()
    }

    fn child(&self, decision: Decision, replacement: Vec<Task>) -> SearchNode {
        let mut decisions = self.decisions.clone();
        decisions.push(decision);
        let mut tasks = replacement;
        tasks.extend_from_slice(&self.tasks[1..]);
        SearchNode { decisions, tasks }
    }

    /// Assembles the instance tree of a leaf.
    pub fn materialize(&self, registry: &ComponentRegistry) -> Result<ComponentInstance, SearchError> {
        if !self.is_leaf() {
            return Err(SearchError::NotALeaf);
        }
        self.assemble(registry, &[])
    }

    fn assemble(&self, registry: &ComponentRegistry, path: &[String]) -> Result<ComponentInstance, SearchError> {
        let name = self.component_at(path).ok_or(SearchError::NotALeaf)?;
        let def = registry
            .component(name)
            .ok_or_else(|| SearchError::Malformed(format!("unknown component '{name}'")))?;
        let mut inst = ComponentInstance::new(name);
        for p in &def.params {
            inst.params.insert(p.name.clone(), p.default_value());
        }
        for d in &self.decisions {
            if let Decision::Value { path: p, param, value } = d {
                if p == path {
                    inst.params.insert(param.clone(), value.clone());
                }
            }
        }
        for slot in &def.requires {
            let mut child_path = path.to_vec();
            child_path.push(slot.slot.clone());
            inst.children
                .insert(slot.slot.clone(), self.assemble(registry, &child_path)?);
        }
        Ok(inst)
    }
}

fn param_tasks(def: &ComponentDef, path: &SlotPath) -> Vec<Task> {
    def.params
        .iter()
        .map(|p| match &p.kind {
            ParamKind::Categorical { values } => Task::SetCategorical {
                path: path.clone(),
                param: p.name.clone(),
                values: values.clone(),
            },
            ParamKind::Numeric {
                min,
                max,
                log,
                g,
                integer,
            } => Task::RefineNumeric {
                path: path.clone(),
                param: p.name.clone(),
                lo: *min,
                hi: *max,
                level: 0,
                log: *log,
                g: *g,
                integer: *integer,
            },
        })
        .collect()
}

fn is_fine_enough(level: u32, g: f64) -> bool {
    0.5f64.powi(level as i32) <= g * (1.0 + 1e-12)
}

/// The start node: an empty plan and the single task of resolving `target`.
pub fn root_node(registry: &ComponentRegistry, target: &str) -> Result<SearchNode, SearchError> {
    if !registry.has_interface(target) {
        return Err(SearchError::UnknownInterface(target.into()));
    }
    Ok(SearchNode {
        decisions: Vec::new(),
        tasks: vec![Task::ResolveInterface {
            path: Vec::new(),
            interface: target.into(),
        }],
    })
}

/// Children of `node`, refining its first open task.
pub fn successors(registry: &ComponentRegistry, node: &SearchNode) -> Result<Vec<SearchNode>, SearchError> {
    let task = node.tasks.first().ok_or(SearchError::LeafNode)?;
    Ok(match task {
        Task::ResolveInterface { path, interface } => {
            let ancestors = node.ancestors(path);
            registry
                .providers(interface)
                .into_iter()
                .filter(|def| registry.admits(def, path.len(), &ancestors))
                .map(|def| {
                    let mut subtasks = param_tasks(def, path);
                    subtasks.extend(def.requires.iter().map(|s| {
                        let mut child = path.clone();
                        child.push(s.slot.clone());
                        Task::ResolveInterface {
                            path: child,
                            interface: s.interface.clone(),
                        }
                    }));
                    node.child(
                        Decision::Component {
                            path: path.clone(),
                            component: def.name.clone(),
                        },
                        subtasks,
                    )
                })
                .collect()
        }
        Task::SetCategorical { path, param, values } => values
            .iter()
            .map(|v| {
                node.child(
                    Decision::Value {
                        path: path.clone(),
                        param: param.clone(),
                        value: v.clone(),
                    },
                    Vec::new(),
                )
            })
            .collect(),
        Task::RefineNumeric {
            path,
            param,
            lo,
            hi,
            level,
            log,
            g,
            integer,
        } => {
            if is_fine_enough(*level, *g) {
                vec![node.child(
                    Decision::Value {
                        path: path.clone(),
                        param: param.clone(),
                        value: numeric_value(midpoint(*lo, *hi, *log), *integer),
                    },
                    Vec::new(),
                )]
            } else {
                let mid = midpoint(*lo, *hi, *log);
                [(*lo, mid), (mid, *hi)]
                    .into_iter()
                    .map(|(a, b)| {
                        node.child(
                            Decision::Interval {
                                path: path.clone(),
                                param: param.clone(),
                                lo: a,
                                hi: b,
                            },
                            vec![Task::RefineNumeric {
                                path: path.clone(),
                                param: param.clone(),
                                lo: a,
                                hi: b,
                                level: level + 1,
                                log: *log,
                                g: *g,
                                integer: *integer,
                            }],
                        )
                    })
                    .collect()
            }
        }
    })
}

/// How rollouts complete numeric parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompletionMode {
    /// One uniform draw within the current interval (log-uniform on log
    /// scales).
    #[default]
    Sample,
    /// Follow the halving tree like every other choice.
    Descend,
}

/// Draws a uniformly random child at every step until a leaf.
pub fn random_completion(
    registry: &ComponentRegistry,
    node: &SearchNode,
    seed: u64,
    mode: CompletionMode,
) -> Result<ComponentInstance, SearchError> {
    let mut rng = rng_from_seed(seed);
    let mut current = node.clone();
    while !current.is_leaf() {
        if let (
            CompletionMode::Sample,
            Task::RefineNumeric {
                path,
                param,
                lo,
                hi,
                log,
                integer,
                ..
            },
        ) = (mode, &current.tasks[0])
        {
            let v = if *log {
                rng.random_range(lo.ln()..=hi.ln()).exp().clamp(*lo, *hi)
            } else {
                rng.random_range(*lo..=*hi)
            };
            let decision = Decision::Value {
                path: path.clone(),
                param: param.clone(),
                value: numeric_value(v, *integer),
            };
            current = current.child(decision, Vec::new());
            continue;
        }
        let mut kids = successors(registry, &current)?;
        if kids.is_empty() {
            return Err(SearchError::DeadEnd);
        }
        let pick = rng.random_range(0..kids.len());
        current = kids.swap_remove(pick);
    }
    current.materialize(registry)
}

/// Materialized leaves below `node` in depth-first successor order.
pub fn expand_leaves(
    registry: &ComponentRegistry,
    node: &SearchNode,
    cap: usize,
) -> Result<Vec<ComponentInstance>, SearchError> {
    let mut out = Vec::new();
    let mut stack = vec![node.clone()];
    while let Some(n) = stack.pop() {
        if n.is_leaf() {
            if out.len() == cap {
                return Err(SearchError::ExplosionGuard(cap));
            }
            out.push(n.materialize(registry)?);
            continue;
        }
        let mut kids = successors(registry, &n)?;
        kids.reverse();
        stack.extend(kids);
    }
    Ok(out)
}

fn numeric_grid(lo: f64, hi: f64, level: u32, log: bool, g: f64, integer: bool, out: &mut Vec<ParamValue>) {
    if is_fine_enough(level, g) {
        out.push(numeric_value(midpoint(lo, hi, log), integer));
    } else {
        let mid = midpoint(lo, hi, log);
        numeric_grid(lo, mid, level + 1, log, g, integer, out);
        numeric_grid(mid, hi, level + 1, log, g, integer, out);
    }
}

fn param_values(kind: &ParamKind) -> Vec<ParamValue> {
    match kind {
        ParamKind::Categorical { values } => values.clone(),
        ParamKind::Numeric {
            min,
            max,
            log,
            g,
            integer,
        } => {
            let mut out = Vec::new();
            numeric_grid(*min, *max, 0, *log, *g, *integer, &mut out);
            out
        }
    }
}

fn derivations(
    registry: &ComponentRegistry,
    interface: &str,
    depth: usize,
    ancestors: &mut Vec<String>,
    cap: usize,
) -> Result<Vec<ComponentInstance>, SearchError> {
    let mut out = Vec::new();
    if depth > registry.max_depth {
        return Ok(out);
    }
    for def in registry.providers(interface) {
        let repeats = ancestors.iter().filter(|a| **a == def.name).count();
        let forbidden = registry
            .forbid
            .iter()
            .any(|r| r.inner == def.name && ancestors.contains(&r.outer));
        if repeats + 1 > registry.max_recursion || forbidden {
            continue;
        }
        let params: Vec<(String, Vec<ParamValue>)> = def
            .params
            .iter()
            .map(|p| (p.name.clone(), param_values(&p.kind)))
            .collect();
        ancestors.push(def.name.clone());
        let slots = def
            .requires
            .iter()
            .map(|s| {
                Ok((
                    s.slot.clone(),
                    derivations(registry, &s.interface, depth + 1, ancestors, cap)?,
                ))
            })
            .collect::<Result<Vec<_>, SearchError>>();
        ancestors.pop();
        let slots = slots?;
        let total = params
            .iter()
            .map(|(_, v)| v.len())
            .chain(slots.iter().map(|(_, v)| v.len()))
            .try_fold(1usize, |acc, n| acc.checked_mul(n))
            .unwrap_or(usize::MAX);
        if out.len().saturating_add(total) > cap {
            return Err(SearchError::ExplosionGuard(cap));
        }
        // Odometer over parameter values then slot fillings, last varying fastest.
        let radices: Vec<usize> = params
            .iter()
            .map(|(_, v)| v.len())
            .chain(slots.iter().map(|(_, v)| v.len()))
            .collect();
        if radices.contains(&0) {
            continue;
        }
        let mut digits = vec![0usize; radices.len()];
        loop {
            let mut inst = ComponentInstance {
                component: def.name.clone(),
                params: BTreeMap::new(),
                children: BTreeMap::new(),
            };
            for (k, (name, values)) in params.iter().enumerate() {
                inst.params.insert(name.clone(), values[digits[k]].clone());
            }
            for (k, (slot, insts)) in slots.iter().enumerate() {
                inst.children
                    .insert(slot.clone(), insts[digits[params.len() + k]].clone());
            }
            out.push(inst);
            let mut pos = radices.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < radices[pos] {
                    break;
                }
                digits[pos] = 0;
            }
            if digits.iter().all(|&d| d == 0) {
                break;
            }
        }
    }
    Ok(out)
}

/// Every leaf of the space rooted at `target`, by direct recursion over the
/// grammar (independent of [`successors`]).
pub fn enumerate_leaves(
    registry: &ComponentRegistry,
    target: &str,
    cap: usize,
) -> Result<Vec<ComponentInstance>, SearchError> {
    if !registry.has_interface(target) {
        return Err(SearchError::UnknownInterface(target.into()));
    }
    derivations(registry, target, 0, &mut Vec::new(), cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::searchspace::{ComponentDef, ParamDef};

    fn toy() -> ComponentRegistry {
        ComponentRegistry::new(vec![
            ComponentDef::new("br", &["MLC"]).slot("base", "SLC-binary"),
            ComponentDef::new("a", &["SLC-binary"]).param(ParamDef::categorical("p", vec![1i64.into(), 2i64.into()])),
            ComponentDef::new("b", &["SLC-binary"]).param(ParamDef::categorical("q", vec!["u".into(), "v".into()])),
        ])
        .unwrap()
    }

    #[test]
    fn root_and_unknown_interface() {
        let reg = toy();
        let root = root_node(&reg, "MLC").unwrap();
        assert_eq!(root.tasks.len(), 1);
        assert!(root_node(&reg, "SLC-binary").is_ok());
        assert_eq!(root_node(&reg, "FOO"), Err(SearchError::UnknownInterface("FOO".into())));
    }

    #[test]
    fn toy_space_has_four_leaves() {
        let reg = toy();
        let root = root_node(&reg, "MLC").unwrap();
        let kids = successors(&reg, &root).unwrap();
        assert_eq!(kids.len(), 1);
        let grand = successors(&reg, &kids[0]).unwrap();
        assert_eq!(grand.len(), 2);
        assert_eq!(expand_leaves(&reg, &root, 100).unwrap().len(), 4);
        assert_eq!(enumerate_leaves(&reg, "MLC", 100).unwrap().len(), 4);
        assert_eq!(
            successors(
                &reg,
                &SearchNode {
                    decisions: vec![],
                    tasks: vec![]
                }
            ),
            Err(SearchError::LeafNode)
        );
    }

    #[test]
    fn numeric_refinement_rule() {
        let reg = ComponentRegistry::new(vec![
            ComponentDef::new("x", &["MLC"]).param(ParamDef::numeric("v", 0.0, 1.0, false, 0.25))
        ])
        .unwrap();
        let root = root_node(&reg, "MLC").unwrap();
        let n = successors(&reg, &root).unwrap().remove(0);
        let halves = successors(&reg, &n).unwrap();
        let bounds: Vec<(f64, f64)> = halves
            .iter()
            .map(|h| match &h.tasks[0] {
                Task::RefineNumeric { lo, hi, .. } => (*lo, *hi),
                t => panic!("{t}"),
            })
            .collect();
        assert_eq!(bounds, vec![(0.0, 0.5), (0.5, 1.0)]);
        let quarter = successors(&reg, &halves[0]).unwrap().remove(0);
        let fixed = successors(&reg, &quarter).unwrap();
        assert_eq!(fixed.len(), 1);
        let inst = fixed[0].materialize(&reg).unwrap();
        assert_eq!(inst.params["v"], ParamValue::Float(0.125));
    }

    #[test]
    fn log_scale_uses_geometric_midpoints() {
        let reg = ComponentRegistry::new(vec![
            ComponentDef::new("x", &["MLC"]).param(ParamDef::numeric("v", 1.0, 100.0, true, 0.5))
        ])
        .unwrap();
        let leaves = enumerate_leaves(&reg, "MLC", 10).unwrap();
        let values: Vec<f64> = leaves.iter().map(|l| l.params["v"].as_f64().unwrap()).collect();
        assert_eq!(values.len(), 2);
        assert!((values[0] - 10f64.powf(0.5)).abs() < 1e-9);
        assert!((values[1] - 10f64.powf(1.5)).abs() < 1e-9);
    }

    #[test]
    fn prefix_monotonicity() {
        let reg = toy();
        let mut frontier = vec![root_node(&reg, "MLC").unwrap()];
        while let Some(n) = frontier.pop() {
            if n.is_leaf() {
                continue;
            }
            for c in successors(&reg, &n).unwrap() {
                assert_eq!(c.decisions.len(), n.decisions.len() + 1);
                assert_eq!(&c.decisions[..n.decisions.len()], &n.decisions[..]);
                assert!(c.tasks.ends_with(&n.tasks[1..]));
                frontier.push(c);
            }
        }
    }

    #[test]
    fn materialize_requires_leaf() {
        let reg = toy();
        let root = root_node(&reg, "MLC").unwrap();
        assert_eq!(root.materialize(&reg), Err(SearchError::NotALeaf));
    }

    #[test]
    fn completion_is_deterministic_and_identity_on_leaves() {
        let reg = toy();
        let root = root_node(&reg, "MLC").unwrap();
        for seed in 0..20 {
            let a = random_completion(&reg, &root, seed, CompletionMode::Descend).unwrap();
            assert_eq!(
                a,
                random_completion(&reg, &root, seed, CompletionMode::Descend).unwrap()
            );
        }
        let mut n = root;
        while !n.is_leaf() {
            n = successors(&reg, &n).unwrap().remove(0);
        }
        assert_eq!(
            random_completion(&reg, &n, 3, CompletionMode::Sample).unwrap(),
            n.materialize(&reg).unwrap()
        );
    }

    #[test]
    fn sampled_numeric_values_stay_in_range() {
        let reg = ComponentRegistry::new(vec![ComponentDef::new("x", &["MLC"])
            .param(ParamDef::numeric("lr", 1e-4, 1.0, true, 1.0 / 16.0))
            .param(ParamDef {
                name: "k".into(),
                kind: ParamKind::Numeric {
                    min: 1.0,
                    max: 25.0,
                    log: false,
                    g: 1.0 / 16.0,
                    integer: true,
                },
            })])
        .unwrap();
        let root = root_node(&reg, "MLC").unwrap();
        for seed in 0..200 {
            let inst = random_completion(&reg, &root, seed, CompletionMode::Sample).unwrap();
            let lr = inst.params["lr"].as_f64().unwrap();
            assert!((1e-4..=1.0).contains(&lr));
            let k = inst.params["k"].as_i64().unwrap();
            assert!((1..=25).contains(&k));
            inst.validate(&reg).unwrap();
        }
    }

    #[test]
    fn explosion_guard() {
        let reg = ComponentRegistry::new(vec![ComponentDef::new("x", &["MLC"])
            .param(ParamDef::numeric("a", 0.0, 1.0, false, 1.0 / 16.0))
            .param(ParamDef::numeric("b", 0.0, 1.0, false, 1.0 / 16.0))])
        .unwrap();
        assert_eq!(
            enumerate_leaves(&reg, "MLC", 255),
            Err(SearchError::ExplosionGuard(255))
        );
        assert_eq!(enumerate_leaves(&reg, "MLC", 256).unwrap().len(), 256);
        let root = root_node(&reg, "MLC").unwrap();
        assert_eq!(expand_leaves(&reg, &root, 100), Err(SearchError::ExplosionGuard(100)));
    }
}
