//! Candidate evaluation: holdout and Monte-Carlo cross-validation,
//! training-subsample budgets, cooperative timeouts and an online runtime
//! guard.
//!
//! Preprocessors are always fitted on training rows only; validation rows
//! are transformed with the fitted statistics.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{split_indices, DataError, Dataset};
use crate::deadline::Deadline;
use crate::learners::{
    apply_transform, fit_preprocessor, LearnError, LearnerKind, LearnerSpec, PreprocessorKind, PreprocessorSpec,
    Transform,
};
use crate::losses::{compute_loss, LossKind};
use crate::mlc::{fit_mlc_until, predict_mlc_until, MlcBase, MlcError, MlcKind, MlcModel, MlcSpec};
use crate::searchspace::{ComponentInstance, ComponentRegistry};
use crate::seed::derive_seed;

/// Interface whose slot-free providers form LiBRe's candidate set.
pub const LIBRE_CANDIDATE_INTERFACE: &str = "SLC-binary";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error(transparent)]
    Split(#[from] DataError),
    #[error("budget fraction {0} outside (0, 1]")]
    InvalidBudget(f64),
    #[error("repeats must be at least 1")]
    InvalidRepeats,
    #[error("all {} repeats failed", .records.len())]
    AllRepeatsFailed { records: Vec<EvaluationRecord> },
}

/// A component tree translated into a preprocessor chain and a multi-label
/// learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub preprocessors: Vec<PreprocessorSpec>,
    pub mlc: MlcSpec,
}

impl Pipeline {
    /// Nested `pipeline` nodes contribute their preprocessors outermost
    /// first. LiBRe draws its candidates from the registry.
    pub fn from_instance(instance: &ComponentInstance, registry: &ComponentRegistry) -> Result<Pipeline, EvalError> {
        let mut preprocessors = Vec::new();
        let mlc = mlc_spec(instance, registry, &mut preprocessors)?;
        Ok(Pipeline { preprocessors, mlc })
    }
}

fn mlc_spec(
    inst: &ComponentInstance,
    registry: &ComponentRegistry,
    pre: &mut Vec<PreprocessorSpec>,
) -> Result<MlcSpec, EvalError> {
    if inst.component == "pipeline" {
        let mut inner = None;
        for child in inst.children.values() {
            match PreprocessorKind::from_name(&child.component) {
                Some(kind) => {
                    if !child.children.is_empty() {
                        return Err(invalid(format!("preprocessor '{}' has slots", child.component)));
                    }
                    pre.push(PreprocessorSpec {
                        name: kind,
                        params: child.params.clone(),
                    });
                }
                None if inner.is_none() => inner = Some(child),
                None => return Err(invalid("pipeline has more than one learner".into())),
            }
        }
        let inner = inner.ok_or_else(|| invalid("pipeline has no learner".into()))?;
        return mlc_spec(inner, registry, pre);
    }
    let kind = MlcKind::from_name(&inst.component)
        .ok_or_else(|| invalid(format!("'{}' is not a multi-label learner", inst.component)))?;
    let base = if kind == MlcKind::Libre {
        MlcBase::Candidates(libre_candidates(registry)?)
    } else {
        MlcBase::Single(learner_spec(single_child(inst)?)?)
    };
    Ok(MlcSpec {
        name: kind,
        params: inst.params.clone(),
        base,
    })
}

/// Slot-free binary learners of the registry at their default parameters,
/// in declaration order.
pub fn libre_candidates(registry: &ComponentRegistry) -> Result<Vec<LearnerSpec>, EvalError> {
    let candidates: Vec<LearnerSpec> = registry
        .providers(LIBRE_CANDIDATE_INTERFACE)
        .into_iter()
        .filter(|c| c.requires.is_empty())
        .filter_map(|c| LearnerKind::from_name(&c.name))
        .map(LearnerSpec::new)
        .collect();
    if candidates.is_empty() {
        return Err(invalid("registry offers no candidates for libre".into()));
    }
    Ok(candidates)
}

fn single_child(inst: &ComponentInstance) -> Result<&ComponentInstance, EvalError> {
    let mut kids = inst.children.values();
    match (kids.next(), kids.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(invalid(format!("'{}' needs exactly one base learner", inst.component))),
    }
}

fn learner_spec(inst: &ComponentInstance) -> Result<LearnerSpec, EvalError> {
    let kind = LearnerKind::from_name(&inst.component)
        .ok_or_else(|| invalid(format!("'{}' is not a single-label learner", inst.component)))?;
    let mut spec = LearnerSpec::new(kind);
    spec.params = inst.params.clone();
    if !inst.children.is_empty() {
        spec = spec.with_nested(learner_spec(single_child(inst)?)?);
    }
    Ok(spec)
}

fn invalid(msg: String) -> EvalError {
    EvalError::InvalidCandidate(msg)
}

/// Fitted preprocessors followed by a fitted multi-label model.
#[derive(Debug, Clone)]
pub struct FittedPipeline {
    pub transforms: Vec<Transform>,
    pub model: MlcModel,
}

pub fn fit_pipeline(
    pipeline: &Pipeline,
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    seed: u64,
    deadline: &Deadline,
) -> Result<FittedPipeline, MlcError> {
    let mut current = x.to_owned();
    let mut transforms = Vec::with_capacity(pipeline.preprocessors.len());
    for p in &pipeline.preprocessors {
        deadline.check().map_err(LearnError::from)?;
        let t = fit_preprocessor(p.name, &p.params, current.view())?;
        current = apply_transform(&t, current.view())?;
        transforms.push(t);
    }
    let model = fit_mlc_until(&pipeline.mlc, current.view(), y, seed, deadline)?;
    Ok(FittedPipeline { transforms, model })
}

impl FittedPipeline {
    pub fn transform(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, MlcError> {
        let mut current = x.to_owned();
        for t in &self.transforms {
            current = apply_transform(t, current.view())?;
        }
        Ok(current)
    }

    /// Scores and hard predictions.
    pub fn predict(
        &self,
        x: ArrayView2<f64>,
        tau: f64,
        deadline: &Deadline,
    ) -> Result<(Array2<f64>, Array2<u8>), MlcError> {
        let z = self.transform(x)?;
        predict_mlc_until(&self.model, z.view(), tau, deadline)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStatus {
    Ok,
    Timeout,
    Error,
    SkippedByGuard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    InvalidCandidate,
    LearnerFailure,
    DimensionMismatch,
    NonFiniteScores,
    Loss,
    Data,
}

/// Outcome of evaluating one candidate. `loss` is present iff the status
/// is `ok`, and then lies in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub status: EvalStatus,
    pub loss: Option<f64>,
    pub runtime_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    pub budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_ms: Option<f64>,
    /// Replayed from an earlier evaluation; `runtime_ms` is the original
    /// runtime.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cached: bool,
    pub candidate: ComponentInstance,
}

impl EvaluationRecord {
    pub fn ok(candidate: &ComponentInstance, loss: f64, runtime_ms: f64) -> Self {
        EvaluationRecord {
            status: EvalStatus::Ok,
            loss: Some(loss),
            runtime_ms,
            error: None,
            message: None,
            split_seed: None,
            budget: 1.0,
            predicted_ms: None,
            cached: false,
            candidate: candidate.clone(),
        }
    }

    pub fn failed(candidate: &ComponentInstance, kind: ErrorKind, message: String, runtime_ms: f64) -> Self {
        EvaluationRecord {
            status: EvalStatus::Error,
            loss: None,
            error: Some(kind),
            message: Some(message),
            ..EvaluationRecord::ok(candidate, 0.0, runtime_ms)
        }
    }

    pub fn timeout(candidate: &ComponentInstance, runtime_ms: f64) -> Self {
        EvaluationRecord {
            status: EvalStatus::Timeout,
            loss: None,
            ..EvaluationRecord::ok(candidate, 0.0, runtime_ms)
        }
    }

    pub fn skipped(candidate: &ComponentInstance, predicted_ms: f64) -> Self {
        EvaluationRecord {
            status: EvalStatus::SkippedByGuard,
            loss: None,
            predicted_ms: Some(predicted_ms),
            ..EvaluationRecord::ok(candidate, 0.0, 0.0)
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }

    /// Short failure description for traces.
    pub fn failure(&self) -> Option<String> {
        match self.status {
            EvalStatus::Ok => None,
            EvalStatus::Timeout => Some("timeout".into()),
            EvalStatus::SkippedByGuard => Some("skipped_by_guard".into()),
            EvalStatus::Error => Some(match (&self.error, &self.message) {
                (Some(k), Some(m)) => format!(
                    "{}: {m}",
                    serde_json::to_value(k).expect("serializes").as_str().unwrap_or("error")
                ),
                _ => "error".into(),
            }),
        }
    }
}

/// Loss, threshold, time limit and fit seed shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub loss: LossKind,
    pub timeout_s: f64,
    pub tau: f64,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            loss: LossKind::Hamming,
            timeout_s: 60.0,
            tau: 0.5,
            seed: 0,
        }
    }
}

fn deadline_for(timeout_s: f64) -> Deadline {
    if timeout_s.is_finite() {
        Deadline::after(Duration::from_secs_f64(timeout_s.max(0.0)))
    } else {
        Deadline::never()
    }
}

fn classify(err: &MlcError) -> ErrorKind {
    match err {
        MlcError::DimensionMismatch { .. } => ErrorKind::DimensionMismatch,
        MlcError::InvalidSpec(_) => ErrorKind::InvalidCandidate,
        MlcError::Loss(_) => ErrorKind::Loss,
        _ => match err.learner_error() {
            Some(LearnError::DimensionMismatch { .. }) => ErrorKind::DimensionMismatch,
            Some(LearnError::InvalidParam(_)) => ErrorKind::InvalidCandidate,
            _ => ErrorKind::LearnerFailure,
        },
    }
}

fn run_pipeline(
    pipeline: &Pipeline,
    train: (ArrayView2<f64>, ArrayView2<u8>),
    val: (ArrayView2<f64>, ArrayView2<u8>),
    settings: &EvalSettings,
    deadline: &Deadline,
) -> Result<f64, (ErrorKind, MlcError)> {
    let fitted = fit_pipeline(pipeline, train.0, train.1, settings.seed, deadline).map_err(|e| (classify(&e), e))?;
    let (scores, hard) = fitted
        .predict(val.0, settings.tau, deadline)
        .map_err(|e| (classify(&e), e))?;
    if scores.iter().any(|v| !v.is_finite()) {
        return Err((
            ErrorKind::NonFiniteScores,
            MlcError::InvalidSpec("non-finite scores".into()),
        ));
    }
    compute_loss::<f64>(settings.loss, &val.1.to_owned(), &hard).map_err(|e| (ErrorKind::Loss, e.into()))
}

fn evaluate_views(
    candidate: &ComponentInstance,
    registry: &ComponentRegistry,
    train: (ArrayView2<f64>, ArrayView2<u8>),
    val: (ArrayView2<f64>, ArrayView2<u8>),
    settings: &EvalSettings,
) -> EvaluationRecord {
    let start = Instant::now();
    let elapsed = || start.elapsed().as_secs_f64() * 1000.0;
    let pipeline = match Pipeline::from_instance(candidate, registry) {
        Ok(p) => p,
        Err(e) => return EvaluationRecord::failed(candidate, ErrorKind::InvalidCandidate, e.to_string(), elapsed()),
    };
    let deadline = deadline_for(settings.timeout_s);
    let outcome = run_pipeline(&pipeline, train, val, settings, &deadline);
    let runtime_ms = elapsed();
    let over_time = runtime_ms > settings.timeout_s * 1000.0;
    match outcome {
        Err((_, e)) if e.is_timeout() => EvaluationRecord::timeout(candidate, runtime_ms),
        _ if over_time => EvaluationRecord::timeout(candidate, runtime_ms),
        Ok(loss) => EvaluationRecord::ok(candidate, loss, runtime_ms),
        Err((kind, e)) => EvaluationRecord::failed(candidate, kind, e.to_string(), runtime_ms),
    }
}

/// Fits the candidate on `train` and reports its loss on `val`. Runs that
/// exceed `timeout_s` are reported as timeouts even if they finished.
pub fn evaluate_pipeline(
    candidate: &ComponentInstance,
    registry: &ComponentRegistry,
    train: &Dataset,
    val: &Dataset,
    settings: &EvalSettings,
) -> EvaluationRecord {
    if train.n_features() != val.n_features() || train.n_labels() != val.n_labels() {
        return EvaluationRecord::failed(
            candidate,
            ErrorKind::DimensionMismatch,
            "train and validation schemas differ".into(),
            0.0,
        );
    }
    evaluate_views(
        candidate,
        registry,
        (train.features.view(), train.labels.view()),
        (val.features.view(), val.labels.view()),
        settings,
    )
}

/// Number of training rows used at budget fraction `b`.
pub fn budget_rows(n_train: usize, b: f64) -> usize {
    ((b * n_train as f64 - 1e-9).ceil() as usize).clamp(1, n_train.max(1))
}

/// Holdout evaluation on the seeded split of `ds`, training on the first
/// `ceil(b * N_train)` rows of the shuffled training part.
pub fn budgeted_evaluate(
    candidate: &ComponentInstance,
    registry: &ComponentRegistry,
    ds: &Dataset,
    budget: f64,
    split_seed: u64,
    train_ratio: f64,
    settings: &EvalSettings,
) -> Result<EvaluationRecord, EvalError> {
    if !(budget > 0.0 && budget <= 1.0) {
        return Err(EvalError::InvalidBudget(budget));
    }
    let (train_idx, val_idx) = split_indices(ds.n_rows(), train_ratio, split_seed)?;
    let n_b = budget_rows(train_idx.len(), budget);
    let train = ds.select_rows(&train_idx[..n_b]);
    let val = ds.select_rows(&val_idx);
    let mut record = evaluate_pipeline(candidate, registry, &train, &val, settings);
    record.split_seed = Some(split_seed);
    record.budget = budget;
    Ok(record)
}

/// Fraction of rows held out from the search for final testing.
pub const TEST_FRACTION: f64 = 0.2;

/// Seeded 80/20 partition into search rows and held-out test rows, as
/// index lists into `ds`.
pub fn outer_split(ds: &Dataset, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    Ok(split_indices(
        ds.n_rows(),
        1.0 - TEST_FRACTION,
        derive_seed(seed, u64::MAX),
    )?)
}

/// Mean loss and per-repeat records of Monte-Carlo cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MccvResult {
    pub mean_loss: f64,
    pub records: Vec<EvaluationRecord>,
}

/// Repeated seeded holdout splits; repeat `r` uses split seed
/// `derive_seed(seed, r)`. The mean is over successful repeats.
pub fn mccv(
    candidate: &ComponentInstance,
    registry: &ComponentRegistry,
    ds: &Dataset,
    repeats: usize,
    train_ratio: f64,
    seed: u64,
    settings: &EvalSettings,
) -> Result<MccvResult, EvalError> {
    if repeats == 0 {
        return Err(EvalError::InvalidRepeats);
    }
    let records = (0..repeats as u64)
        .map(|r| {
            budgeted_evaluate(
                candidate,
                registry,
                ds,
                1.0,
                derive_seed(seed, r),
                train_ratio,
                settings,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let losses: Vec<f64> = records.iter().filter_map(|r| r.loss).collect();
    if losses.is_empty() {
        return Err(EvalError::AllRepeatsFailed { records });
    }
    Ok(MccvResult {
        mean_loss: losses.iter().sum::<f64>() / losses.len() as f64,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Observations needed before the guard may skip anything.
    pub warmup: usize,
    /// Skip when the prediction exceeds `threshold * timeout`.
    pub threshold: f64,
    /// Timed-out runs enter the history as `censor_penalty * timeout`.
    pub censor_penalty: f64,
    /// Ridge penalty on the per-component indicator coefficients.
    pub ridge: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig {
            warmup: 10,
            threshold: 2.0,
            censor_penalty: 10.0,
            ridge: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeObservation {
    pub n_rows: usize,
    pub n_cols: usize,
    pub size: usize,
    pub components: Vec<String>,
    pub log_ms: f64,
    #[serde(default)]
    pub timed_out: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum GuardDecision {
    Proceed,
    Skip { predicted_ms: f64 },
}

/// Observed runtimes and the least-squares model fitted on them.
///
/// Features are `(1, ln n_rows, ln n_cols, size)` followed by one count
/// per component name seen so far (sorted by name).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeHistory {
    pub config: GuardConfig,
    observations: Vec<RuntimeObservation>,
    vocabulary: Vec<String>,
    coefficients: Option<Vec<f64>>,
}

const BASE_FEATURES: usize = 4;

impl RuntimeHistory {
    pub fn new(config: GuardConfig) -> Self {
        RuntimeHistory {
            config,
            observations: Vec::new(),
            vocabulary: Vec::new(),
            coefficients: None,
        }
    }

    pub fn observations(&self) -> &[RuntimeObservation] {
        &self.observations
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        self.coefficients.as_deref()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    fn features(&self, n_rows: usize, n_cols: usize, size: usize, components: &[String]) -> Vec<f64> {
        let mut f = vec![
            1.0,
            (n_rows.max(1) as f64).ln(),
            (n_cols.max(1) as f64).ln(),
            size as f64,
        ];
        f.extend(
            self.vocabulary
                .iter()
                .map(|name| components.iter().filter(|c| *c == name).count() as f64),
        );
        f
    }

    /// Appends an observation and refits once the warmup is reached.
    pub fn record(&mut self, observation: RuntimeObservation) {
        self.observations.push(observation);
        if self.observations.len() >= self.config.warmup {
            self.refit();
        }
    }

    /// Records a finished evaluation; timeouts are censored at
    /// `censor_penalty * timeout_s`.
    pub fn record_evaluation(
        &mut self,
        candidate: &ComponentInstance,
        n_rows: usize,
        n_cols: usize,
        runtime_ms: f64,
        timed_out: bool,
        timeout_s: f64,
    ) {
        let ms = if timed_out {
            runtime_ms.max(self.config.censor_penalty * timeout_s * 1000.0)
        } else {
            runtime_ms
        };
        self.record(RuntimeObservation {
            n_rows,
            n_cols,
            size: candidate.size(),
            components: candidate.components().into_iter().map(String::from).collect(),
            log_ms: ms.max(1e-3).ln(),
            timed_out,
        });
    }

    fn refit(&mut self) {
        let names: BTreeSet<&str> = self
            .observations
            .iter()
            .flat_map(|o| o.components.iter().map(String::as_str))
            .collect();
        self.vocabulary = names.into_iter().map(String::from).collect();
        let p = BASE_FEATURES + self.vocabulary.len();
        let n = self.observations.len();
        let mut x = DMatrix::<f64>::zeros(n, p);
        let mut y = DVector::<f64>::zeros(n);
        for (i, o) in self.observations.iter().enumerate() {
            for (j, v) in self
                .features(o.n_rows, o.n_cols, o.size, &o.components)
                .into_iter()
                .enumerate()
            {
                x[(i, j)] = v;
            }
            y[i] = o.log_ms;
        }
        let mut gram = x.transpose() * &x;
        for j in 0..p {
            gram[(j, j)] += if j < BASE_FEATURES { 1e-8 } else { self.config.ridge };
        }
        self.coefficients = gram
            .cholesky()
            .map(|c| c.solve(&(x.transpose() * y)))
            .filter(|b| b.iter().all(|v| v.is_finite()))
            .map(|b| b.iter().copied().collect());
    }

    /// Smallest recorded log runtime of `component` if every observation
    /// containing it timed out.
    fn censored_floor(&self, component: &str) -> Option<f64> {
        let mut floor: Option<f64> = None;
        for o in self
            .observations
            .iter()
            .filter(|o| o.components.iter().any(|c| c == component))
        {
            if !o.timed_out {
                return None;
            }
            floor = Some(floor.map_or(o.log_ms, |f| f.min(o.log_ms)));
        }
        floor
    }

    /// Predicted runtime in milliseconds, once a model is fitted. Components
    /// seen only in timed-out runs bound the prediction from below by their
    /// smallest recorded runtime.
    pub fn predict_ms(&self, candidate: &ComponentInstance, n_rows: usize, n_cols: usize) -> Option<f64> {
        let beta = self.coefficients.as_ref()?;
        let components: Vec<String> = candidate.components().into_iter().map(String::from).collect();
        let f = self.features(n_rows, n_cols, candidate.size(), &components);
        let linear: f64 = f.iter().zip(beta).map(|(a, b)| a * b).sum();
        let log_ms = components
            .iter()
            .filter_map(|c| self.censored_floor(c))
            .fold(linear, f64::max);
        log_ms.is_finite().then(|| log_ms.exp())
    }

    pub fn decide(&self, candidate: &ComponentInstance, n_rows: usize, n_cols: usize, timeout_s: f64) -> GuardDecision {
        if self.observations.len() < self.config.warmup {
            return GuardDecision::Proceed;
        }
        match self.predict_ms(candidate, n_rows, n_cols) {
            Some(ms) if ms > self.config.threshold * timeout_s * 1000.0 => GuardDecision::Skip { predicted_ms: ms },
            _ => GuardDecision::Proceed,
        }
    }
}

/// Guard decision for training `candidate` on all rows of `ds`.
pub fn runtime_guard(
    history: &RuntimeHistory,
    candidate: &ComponentInstance,
    ds: &Dataset,
    timeout_s: f64,
) -> GuardDecision {
    history.decide(candidate, ds.n_rows(), ds.n_features(), timeout_s)
}

/// Scores candidates for the optimizers. `budget` is a training-subsample
/// fraction in (0, 1].
pub trait Evaluator: Sync {
    fn evaluate(&self, candidate: &ComponentInstance, budget: f64) -> EvaluationRecord;
}

/// Wraps a loss function; `None` becomes a learner failure.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&ComponentInstance, f64) -> Option<f64> + Sync,
{
    fn evaluate(&self, candidate: &ComponentInstance, budget: f64) -> EvaluationRecord {
        let mut record = match (self.0)(candidate, budget) {
            Some(loss) => EvaluationRecord::ok(candidate, loss, 0.0),
            None => EvaluationRecord::failed(candidate, ErrorKind::LearnerFailure, "evaluator failed".into(), 0.0),
        };
        record.budget = budget;
        record
    }
}

/// Evaluates candidate trees on a fixed dataset with seeded holdout
/// splits, an optional runtime guard and a result cache keyed by candidate
/// and budget.
pub struct PipelineEvaluator {
    registry: ComponentRegistry,
    data: Dataset,
    settings: EvalSettings,
    train_ratio: f64,
    repeats: usize,
    history: Option<Mutex<RuntimeHistory>>,
    cache: Mutex<HashMap<(String, u64), EvaluationRecord>>,
}

impl PipelineEvaluator {
    pub fn new(registry: ComponentRegistry, data: Dataset, settings: EvalSettings) -> Self {
        PipelineEvaluator {
            registry,
            data,
            settings,
            train_ratio: 0.7,
            repeats: 1,
            history: None,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_split(mut self, train_ratio: f64, repeats: usize) -> Self {
        self.train_ratio = train_ratio;
        self.repeats = repeats.max(1);
        self
    }

    pub fn with_guard(mut self, config: GuardConfig) -> Self {
        self.history = Some(Mutex::new(RuntimeHistory::new(config)));
        self
    }

    pub fn settings(&self) -> &EvalSettings {
        &self.settings
    }

    pub fn registry(&self) -> &ComponentRegistry {
        &self.registry
    }

    /// Rows every evaluation splits into training and validation parts.
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn history(&self) -> Option<RuntimeHistory> {
        self.history.as_ref().map(|h| h.lock().expect("history lock").clone())
    }

    fn training_rows(&self, budget: f64) -> usize {
        let n_train = (self.train_ratio * self.data.n_rows() as f64 - 1e-9).ceil() as usize;
        budget_rows(n_train, budget)
    }

    fn run(&self, candidate: &ComponentInstance, budget: f64) -> EvaluationRecord {
        let mut records = Vec::with_capacity(self.repeats);
        for r in 0..self.repeats as u64 {
            let split_seed = derive_seed(self.settings.seed, r);
            let record = budgeted_evaluate(
                candidate,
                &self.registry,
                &self.data,
                budget,
                split_seed,
                self.train_ratio,
                &self.settings,
            )
            .unwrap_or_else(|e| {
                let mut rec = EvaluationRecord::failed(candidate, ErrorKind::Data, e.to_string(), 0.0);
                rec.budget = budget;
                rec
            });
            records.push(record);
        }
        let runtime_ms: f64 = records.iter().map(|r| r.runtime_ms).sum();
        let losses: Vec<f64> = records.iter().filter_map(|r| r.loss).collect();
        let mut out = if losses.is_empty() {
            records.swap_remove(0)
        } else {
            let mut rec = records.swap_remove(0);
            rec.status = EvalStatus::Ok;
            rec.loss = Some(losses.iter().sum::<f64>() / losses.len() as f64);
            rec.error = None;
            rec.message = None;
            rec
        };
        out.runtime_ms = runtime_ms;
        out
    }
}

impl Evaluator for PipelineEvaluator {
    fn evaluate(&self, candidate: &ComponentInstance, budget: f64) -> EvaluationRecord {
        let key = (candidate.key(), budget.to_bits());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return EvaluationRecord {
                cached: true,
                ..hit.clone()
            };
        }
        let n_rows = self.training_rows(budget);
        let n_cols = self.data.n_features();
        let timeout_s = self.settings.timeout_s;
        if let Some(history) = &self.history {
            let decision = history
                .lock()
                .expect("history lock")
                .decide(candidate, n_rows, n_cols, timeout_s);
            if let GuardDecision::Skip { predicted_ms } = decision {
                let mut rec = EvaluationRecord::skipped(candidate, predicted_ms);
                rec.budget = budget;
                self.cache.lock().expect("cache lock").insert(key, rec.clone());
                return rec;
            }
        }
        let record = self.run(candidate, budget);
        if let Some(history) = &self.history {
            if matches!(record.status, EvalStatus::Ok | EvalStatus::Timeout) {
                history.lock().expect("history lock").record_evaluation(
                    candidate,
                    n_rows,
                    n_cols,
                    record.runtime_ms,
                    record.status == EvalStatus::Timeout,
                    timeout_s,
                );
            }
        }
        self.cache.lock().expect("cache lock").insert(key, record.clone());
        record
    }
}
