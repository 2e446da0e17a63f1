//! Optimizers over the configuration space: best-first search scored by
//! random-completion rollouts, random search, successive halving and
//! Hyperband, plus the expected-improvement utility.
//!
//! Every optimizer records each evaluation as a [`TraceEvent`] in the order
//! the coordinator receives it. With one worker and a fixed seed the trace
//! is reproducible up to timing fields.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{EvalStatus, EvaluationRecord, Evaluator};
use crate::scalar::Real;
use crate::searchspace::{
    random_completion, root_node, successors, CompletionMode, ComponentInstance, ComponentRegistry, SearchError,
    SearchNode, ROOT_INTERFACE,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptError {
    #[error("the root interface has no completion")]
    EmptySpace,
    #[error("no candidates to evaluate")]
    EmptyCandidates,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sigma must be non-negative")]
    NegativeSigma,
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Min,
    Mean,
}

impl Aggregation {
    /// `+inf` for an empty slice.
    pub fn apply(self, losses: &[f64]) -> f64 {
        if losses.is_empty() {
            return f64::INFINITY;
        }
        match self {
            Aggregation::Min => losses.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregation::Mean => losses.iter().sum::<f64>() / losses.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    BestFirst,
    Random,
    Sh,
    Hyperband,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::BestFirst => "best-first",
            OptimizerKind::Random => "random",
            OptimizerKind::Sh => "sh",
            OptimizerKind::Hyperband => "hyperband",
        }
    }

    pub fn from_name(name: &str) -> Option<OptimizerKind> {
        [
            OptimizerKind::BestFirst,
            OptimizerKind::Random,
            OptimizerKind::Sh,
            OptimizerKind::Hyperband,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }
}

/// Successive-halving and Hyperband parameters. Budgets are
/// training-subsample fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalvingConfig {
    pub eta: usize,
    pub b_min: f64,
    pub b_max: f64,
    /// Number of random candidates a standalone halving run starts with.
    pub candidates: usize,
}

impl Default for HalvingConfig {
    fn default() -> Self {
        HalvingConfig {
            eta: 2,
            b_min: 0.125,
            b_max: 1.0,
            candidates: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    /// Wall-clock budget for the whole search. Evaluations that already
    /// started are allowed to finish.
    pub time_budget_s: f64,
    /// Stop after this many evaluation attempts.
    pub max_evaluations: Option<usize>,
    pub n_completions: usize,
    pub aggregation: Aggregation,
    pub completion: CompletionMode,
    pub workers: usize,
    pub seed: u64,
    pub halving: HalvingConfig,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            time_budget_s: 60.0,
            max_evaluations: None,
            n_completions: 3,
            aggregation: Aggregation::Min,
            completion: CompletionMode::Sample,
            workers: 1,
            seed: 0,
            halving: HalvingConfig::default(),
        }
    }
}

impl OptConfig {
    fn validate(&self) -> Result<(), OptError> {
        if self.time_budget_s.is_nan() || self.time_budget_s < 0.0 {
            return Err(OptError::InvalidConfig("time budget must be non-negative".into()));
        }
        if self.time_budget_s.is_infinite() && self.max_evaluations.is_none() {
            return Err(OptError::InvalidConfig(
                "an unlimited time budget needs an evaluation cap".into(),
            ));
        }
        if self.n_completions == 0 {
            return Err(OptError::InvalidConfig("n_completions must be at least 1".into()));
        }
        let h = &self.halving;
        if h.eta < 2 {
            return Err(OptError::InvalidConfig("eta must be at least 2".into()));
        }
        if !(h.b_min > 0.0 && h.b_min <= h.b_max && h.b_max <= 1.0) {
            return Err(OptError::InvalidConfig(
                "budgets must satisfy 0 < b_min <= b_max <= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Milliseconds since the optimizer started.
    pub timestamp_ms: f64,
    pub candidate: ComponentInstance,
    pub status: EvalStatus,
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub runtime_ms: f64,
    pub budget: f64,
    /// Search-graph node whose scoring produced this evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rollout: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cached: bool,
    /// Running minimum of successful losses, including this event.
    pub best_so_far: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    Completed,
    BudgetExhaustedBeforeAnyEvaluation,
    NoSuccessfulEvaluation,
}

/// One halving round: the budget and the candidate indices evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingRound {
    pub budget: f64,
    pub survivors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub status: OptStatus,
    pub best: Option<ComponentInstance>,
    pub best_loss: Option<f64>,
    /// Evaluations performed, excluding guard skips.
    pub evaluated: usize,
    pub trace: Vec<TraceEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rounds: Vec<HalvingRound>,
}

/// Collects trace events and tracks budgets and the incumbent.
struct Recorder<'a> {
    start: Instant,
    cfg: OptConfig,
    attempts: usize,
    evaluated: usize,
    trace: Vec<TraceEvent>,
    best: Option<(f64, ComponentInstance)>,
    sink: &'a mut dyn FnMut(&TraceEvent),
}

impl<'a> Recorder<'a> {
    fn new(cfg: &OptConfig, sink: &'a mut dyn FnMut(&TraceEvent)) -> Self {
        Recorder {
            start: Instant::now(),
            cfg: *cfg,
            attempts: 0,
            evaluated: 0,
            trace: Vec::new(),
            best: None,
            sink,
        }
    }

    fn remaining_evaluations(&self) -> usize {
        self.cfg
            .max_evaluations
            .map_or(usize::MAX, |m| m.saturating_sub(self.attempts))
    }

    fn exhausted(&self) -> bool {
        self.remaining_evaluations() == 0 || self.start.elapsed().as_secs_f64() >= self.cfg.time_budget_s
    }

    fn record(&mut self, rec: EvaluationRecord, node: Option<u64>, rollout: Option<usize>) -> Option<f64> {
        self.attempts += 1;
        if rec.status != EvalStatus::SkippedByGuard {
            self.evaluated += 1;
        }
        let loss = rec.loss.filter(|l| l.is_finite());
        if let Some(l) = loss {
            if self.best.as_ref().is_none_or(|(b, _)| l < *b) {
                self.best = Some((l, rec.candidate.clone()));
            }
        }
        let cached = rec.cached;
        let event = TraceEvent {
            timestamp_ms: self.start.elapsed().as_secs_f64() * 1000.0,
            failure: rec.failure(),
            candidate: rec.candidate,
            status: rec.status,
            loss,
            runtime_ms: rec.runtime_ms,
            budget: rec.budget,
            node,
            rollout,
            cached,
            best_so_far: self.best.as_ref().map(|(b, _)| *b),
        };
        (self.sink)(&event);
        self.trace.push(event);
        loss
    }

    /// Evaluates a batch, in parallel when more than one worker is
    /// configured, and records the results in batch order.
    fn evaluate_batch(
        &mut self,
        evaluator: &dyn Evaluator,
        pool: Option<&rayon::ThreadPool>,
        batch: Vec<(ComponentInstance, Option<usize>)>,
        budget: f64,
        node: Option<u64>,
    ) -> Vec<Option<f64>> {
        let records: Vec<EvaluationRecord> = match pool {
            Some(pool) => pool.install(|| batch.par_iter().map(|(c, _)| evaluator.evaluate(c, budget)).collect()),
            None => batch.iter().map(|(c, _)| evaluator.evaluate(c, budget)).collect(),
        };
        records
            .into_iter()
            .zip(batch)
            .map(|(rec, (_, rollout))| self.record(rec, node, rollout))
            .collect()
    }

    fn finish(self, rounds: Vec<HalvingRound>) -> OptResult {
        let status = if self.trace.is_empty() {
            OptStatus::BudgetExhaustedBeforeAnyEvaluation
        } else if self.best.is_none() {
            OptStatus::NoSuccessfulEvaluation
        } else {
            OptStatus::Completed
        };
        let (best_loss, best) = match self.best {
            Some((l, c)) => (Some(l), Some(c)),
            None => (None, None),
        };
        OptResult {
            status,
            best,
            best_loss,
            evaluated: self.evaluated,
            trace: self.trace,
            rounds,
        }
    }
}

fn worker_pool(workers: usize) -> Result<Option<rayon::ThreadPool>, OptError> {
    if workers <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map(Some)
        .map_err(|e| OptError::InvalidConfig(e.to_string()))
}

fn checked_root(registry: &ComponentRegistry) -> Result<SearchNode, OptError> {
    if !registry.resolvable(ROOT_INTERFACE) {
        return Err(OptError::EmptySpace);
    }
    root_node(registry, ROOT_INTERFACE).map_err(|_| OptError::EmptySpace)
}

/// Open-list entry; the heap pops the lowest `f`, ties to the earliest id.
#[derive(Debug)]
struct OpenEntry {
    f: f64,
    id: u64,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.id.cmp(&self.id))
    }
}

pub fn best_first(
    registry: &ComponentRegistry,
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
) -> Result<OptResult, OptError> {
    best_first_with(registry, evaluator, cfg, &mut |_| {})
}

/// Best-first search. Each new non-leaf node is scored once by aggregating
/// the successful losses of `n_completions` seeded random completions;
/// nodes without a successful rollout are dropped. Leaves are scored by
/// their own evaluation.
pub fn best_first_with(
    registry: &ComponentRegistry,
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
    sink: &mut dyn FnMut(&TraceEvent),
) -> Result<OptResult, OptError> {
    cfg.validate()?;
    let root = checked_root(registry)?;
    let pool = worker_pool(cfg.workers)?;
    let mut rec = Recorder::new(cfg, sink);
    let mut nodes: Vec<Option<SearchNode>> = vec![Some(root)];
    let mut open = BinaryHeap::new();
    open.push(OpenEntry { f: 0.0, id: 0 });
    'search: while let Some(OpenEntry { id, .. }) = open.pop() {
        if rec.exhausted() {
            break;
        }
        let node = nodes[id as usize].take().expect("each node is expanded once");
        if node.is_leaf() {
            continue;
        }
        for child in successors(registry, &node)? {
            if rec.exhausted() {
                break 'search;
            }
            let child_id = nodes.len() as u64;
            let f = if child.is_leaf() {
                let inst = child.materialize(registry)?;
                let loss = rec.evaluate_batch(evaluator, pool.as_ref(), vec![(inst, None)], 1.0, Some(child_id));
                loss[0].unwrap_or(f64::INFINITY)
            } else {
                let node_seed = derive_seed(cfg.seed, child_id);
                let mut batch = Vec::with_capacity(cfg.n_completions);
                for r in 0..cfg.n_completions.min(rec.remaining_evaluations()) {
                    match random_completion(registry, &child, derive_seed(node_seed, r as u64), cfg.completion) {
                        Ok(inst) => batch.push((inst, Some(r))),
                        Err(SearchError::DeadEnd) => {}
                        Err(e) => return Err(e.into()),
                    }
                }
                let losses: Vec<f64> = rec
                    .evaluate_batch(evaluator, pool.as_ref(), batch, 1.0, Some(child_id))
                    .into_iter()
                    .flatten()
                    .collect();
                cfg.aggregation.apply(&losses)
            };
            nodes.push(Some(child));
            if f.is_finite() {
                open.push(OpenEntry { f, id: child_id });
            }
        }
    }
    Ok(rec.finish(Vec::new()))
}

pub fn random_search(
    registry: &ComponentRegistry,
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
) -> Result<OptResult, OptError> {
    random_search_with(registry, evaluator, cfg, &mut |_| {})
}

/// Evaluates random completions of the root; draw `i` uses seed
/// `derive_seed(seed, i)`.
pub fn random_search_with(
    registry: &ComponentRegistry,
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
    sink: &mut dyn FnMut(&TraceEvent),
) -> Result<OptResult, OptError> {
    cfg.validate()?;
    let root = checked_root(registry)?;
    let pool = worker_pool(cfg.workers)?;
    let mut rec = Recorder::new(cfg, sink);
    let mut draw = 0u64;
    while !rec.exhausted() {
        let size = cfg.workers.max(1).min(rec.remaining_evaluations());
        let mut batch = Vec::with_capacity(size);
        for _ in 0..size {
            let inst = random_completion(registry, &root, derive_seed(cfg.seed, draw), cfg.completion)?;
            batch.push((inst, Some(draw as usize)));
            draw += 1;
        }
        rec.evaluate_batch(evaluator, pool.as_ref(), batch, 1.0, None);
    }
    Ok(rec.finish(Vec::new()))
}

/// Survivors of one halving tournament and the winner's last loss.
struct Tournament {
    rounds: Vec<HalvingRound>,
    winner: Option<(usize, f64)>,
}

fn run_halving(
    rec: &mut Recorder,
    evaluator: &dyn Evaluator,
    pool: Option<&rayon::ThreadPool>,
    candidates: &[ComponentInstance],
    eta: usize,
    b_min: f64,
    b_max: f64,
) -> Tournament {
    let mut survivors: Vec<usize> = (0..candidates.len()).collect();
    let mut rounds = Vec::new();
    let mut last: Vec<f64> = Vec::new();
    let mut r = 0i32;
    loop {
        let budget = (b_min * (eta as f64).powi(r)).min(b_max);
        let size = survivors.len().min(rec.remaining_evaluations());
        if rec.exhausted() || size < survivors.len() {
            break;
        }
        let batch = survivors.iter().map(|&i| (candidates[i].clone(), Some(i))).collect();
        last = rec
            .evaluate_batch(evaluator, pool, batch, budget, None)
            .into_iter()
            .map(|l| l.unwrap_or(f64::INFINITY))
            .collect();
        rounds.push(HalvingRound {
            budget,
            survivors: survivors.clone(),
        });
        if survivors.len() == 1 || budget >= b_max {
            break;
        }
        let keep = survivors.len().div_ceil(eta);
        let mut ranked: Vec<(f64, usize)> = last.iter().copied().zip(survivors.iter().copied()).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        survivors = ranked[..keep].iter().map(|&(_, i)| i).collect();
        survivors.sort_unstable();
        r += 1;
    }
    let evaluated = rounds.last().map_or(&[][..], |round| &round.survivors[..]);
    let winner = evaluated
        .iter()
        .zip(&last)
        .filter(|(_, l)| l.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
        .map(|(&i, &l)| (i, l));
    Tournament { rounds, winner }
}

/// Successive halving over a fixed candidate list. Round `r` evaluates all
/// survivors at `min(b_min * eta^r, b_max)` and keeps the `ceil(n / eta)`
/// best (ties to the earlier index). The winner is the best survivor of
/// the last round by its last loss.
pub fn successive_halving(
    candidates: &[ComponentInstance],
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
) -> Result<OptResult, OptError> {
    successive_halving_with(candidates, evaluator, cfg, &mut |_| {})
}

pub fn successive_halving_with(
    candidates: &[ComponentInstance],
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
    sink: &mut dyn FnMut(&TraceEvent),
) -> Result<OptResult, OptError> {
    cfg.validate()?;
    if candidates.is_empty() {
        return Err(OptError::EmptyCandidates);
    }
    let pool = worker_pool(cfg.workers)?;
    let h = cfg.halving;
    let mut rec = Recorder::new(cfg, sink);
    let t = run_halving(&mut rec, evaluator, pool.as_ref(), candidates, h.eta, h.b_min, h.b_max);
    let mut result = rec.finish(t.rounds);
    if let Some((i, loss)) = t.winner {
        result.best = Some(candidates[i].clone());
        result.best_loss = Some(loss);
    }
    Ok(result)
}

/// Random completions of the root used as halving candidates; candidate
/// `i` uses seed `derive_seed(seed, i)`.
pub fn sample_candidates(
    registry: &ComponentRegistry,
    n: usize,
    seed: u64,
    mode: CompletionMode,
) -> Result<Vec<ComponentInstance>, OptError> {
    let root = checked_root(registry)?;
    (0..n as u64)
        .map(|i| random_completion(registry, &root, derive_seed(seed, i), mode).map_err(OptError::from))
        .collect()
}

/// One Hyperband bracket: `n` candidates starting at budget `b0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: usize,
    pub n: usize,
    pub b0: f64,
}

/// Brackets for `s = s_max..=0` with `s_max = floor(log_eta(b_max / b_min))`
/// and `n_s = ceil((s_max + 1) * eta^s / (s + 1))`.
pub fn hyperband_brackets(eta: usize, b_min: f64, b_max: f64) -> Vec<Bracket> {
    let eta_f = eta as f64;
    let s_max = ((b_max / b_min).ln() / eta_f.ln() + 1e-9).floor().max(0.0) as usize;
    (0..=s_max)
        .rev()
        .map(|s| {
            let n = (((s_max + 1) * eta.pow(s as u32)) as f64 / (s + 1) as f64 - 1e-9).ceil() as usize;
            Bracket {
                s,
                n,
                b0: b_max * eta_f.powi(-(s as i32)),
            }
        })
        .collect()
}

pub fn hyperband(
    registry: &ComponentRegistry,
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
) -> Result<OptResult, OptError> {
    hyperband_with(registry, evaluator, cfg, &mut |_| {})
}

/// Runs successive halving once per bracket on freshly sampled
/// candidates and returns the best bracket winner.
pub fn hyperband_with(
    registry: &ComponentRegistry,
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
    sink: &mut dyn FnMut(&TraceEvent),
) -> Result<OptResult, OptError> {
    cfg.validate()?;
    let root = checked_root(registry)?;
    let pool = worker_pool(cfg.workers)?;
    let h = cfg.halving;
    let mut rec = Recorder::new(cfg, sink);
    let mut rounds = Vec::new();
    let mut best: Option<(f64, ComponentInstance)> = None;
    let mut drawn = 0u64;
    for bracket in hyperband_brackets(h.eta, h.b_min, h.b_max) {
        if rec.exhausted() {
            break;
        }
        let mut candidates = Vec::with_capacity(bracket.n);
        for _ in 0..bracket.n {
            candidates.push(random_completion(
                registry,
                &root,
                derive_seed(cfg.seed, drawn),
                cfg.completion,
            )?);
            drawn += 1;
        }
        let offset = drawn as usize - bracket.n;
        let t = run_halving(
            &mut rec,
            evaluator,
            pool.as_ref(),
            &candidates,
            h.eta,
            bracket.b0,
            h.b_max,
        );
        rounds.extend(t.rounds.into_iter().map(|r| HalvingRound {
            budget: r.budget,
            survivors: r.survivors.into_iter().map(|i| i + offset).collect(),
        }));
        if let Some((i, loss)) = t.winner {
            if best.as_ref().is_none_or(|(b, _)| loss < *b) {
                best = Some((loss, candidates[i].clone()));
            }
        }
    }
    let mut result = rec.finish(rounds);
    if let Some((loss, inst)) = best {
        result.best = Some(inst);
        result.best_loss = Some(loss);
    }
    Ok(result)
}

/// Dispatches to the optimizer named by `kind`; halving draws
/// `cfg.halving.candidates` random candidates.
pub fn run_optimizer(
    kind: OptimizerKind,
    registry: &ComponentRegistry,
    evaluator: &dyn Evaluator,
    cfg: &OptConfig,
    sink: &mut dyn FnMut(&TraceEvent),
) -> Result<OptResult, OptError> {
    match kind {
        OptimizerKind::BestFirst => best_first_with(registry, evaluator, cfg, sink),
        OptimizerKind::Random => random_search_with(registry, evaluator, cfg, sink),
        OptimizerKind::Hyperband => hyperband_with(registry, evaluator, cfg, sink),
        OptimizerKind::Sh => {
            let candidates = sample_candidates(registry, cfg.halving.candidates.max(1), cfg.seed, cfg.completion)?;
            successive_halving_with(&candidates, evaluator, cfg, sink)
        }
    }
}

/// `E[max(best - Y, 0)]` for `Y ~ N(mu, sigma^2)`.
pub fn expected_improvement<T: Real>(mu: T, sigma: T, best: T) -> Result<T, OptError> {
    if sigma < T::zero() || sigma.is_nan() {
        return Err(OptError::NegativeSigma);
    }
    if sigma == T::zero() {
        return Ok((best - mu).max(T::zero()));
    }
    let z = (best - mu) / sigma;
    Ok((sigma * (z * z.std_normal_cdf() + z.std_normal_pdf())).max(T::zero()))
}
