//! Problem-transformation multi-label learners: binary relevance, label-wise
//! base-learner selection (LiBRe), classifier chains, ensembles of chains and
//! label powerset.
//!
//! Every sub-fit derives its seed from the master seed and the label, chain
//! position or ensemble member index, so results do not depend on fit order.

use std::collections::HashMap;
use std::fmt;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{split_indices, Dataset};
use crate::deadline::Deadline;
use crate::learners::{class_probability, fit_learner_until, predict_scores_until, LearnError, LearnerSpec, Model};
use crate::losses::{threshold_scores, LossError};
use crate::params::{resolve, DefaultValue, Domain, ParamDecl, ParamMap, ParamValue};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MlcError {
    #[error("label {label}: {source}")]
    Label { label: usize, source: LearnError },
    #[error("chain position {position} (label {label}): {source}")]
    ChainPosition {
        position: usize,
        label: usize,
        source: LearnError,
    },
    #[error(transparent)]
    Learner(#[from] LearnError),
    #[error("every candidate failed on label {0}")]
    AllCandidatesFailed(usize),
    #[error("invalid multi-label spec: {0}")]
    InvalidSpec(String),
    #[error("expected {expected} feature columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
}

impl MlcError {
    /// The underlying learner error, if any.
    pub fn learner_error(&self) -> Option<&LearnError> {
        match self {
            MlcError::Label { source, .. } | MlcError::ChainPosition { source, .. } | MlcError::Learner(source) => {
                Some(source)
            }
            _ => None,
        }
    }

    pub fn is_timeout(&self) -> bool {
        self.learner_error() == Some(&LearnError::Timeout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlcKind {
    Br,
    Libre,
    Cc,
    Ecc,
    Lp,
}

impl MlcKind {
    pub const ALL: [MlcKind; 5] = [MlcKind::Br, MlcKind::Libre, MlcKind::Cc, MlcKind::Ecc, MlcKind::Lp];

    pub fn name(self) -> &'static str {
        match self {
            MlcKind::Br => "br",
            MlcKind::Libre => "libre",
            MlcKind::Cc => "cc",
            MlcKind::Ecc => "ecc",
            MlcKind::Lp => "lp",
        }
    }

    pub fn from_name(name: &str) -> Option<MlcKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn params(self) -> &'static [ParamDecl] {
        match self {
            MlcKind::Br | MlcKind::Lp => &[],
            MlcKind::Cc => CC_PARAMS,
            MlcKind::Ecc => ECC_PARAMS,
            MlcKind::Libre => LIBRE_PARAMS,
        }
    }
}

impl fmt::Display for MlcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const SEED_DOMAIN: Domain = Domain::Int { min: 0, max: i64::MAX };

const CC_PARAMS: &[ParamDecl] = &[ParamDecl {
    name: "order_seed",
    domain: SEED_DOMAIN,
    default: DefaultValue::Int(0),
}];

const ECC_PARAMS: &[ParamDecl] = &[
    ParamDecl {
        name: "ensemble_size",
        domain: Domain::Int { min: 1, max: 100 },
        default: DefaultValue::Int(5),
    },
    ParamDecl {
        name: "seed",
        domain: SEED_DOMAIN,
        default: DefaultValue::Int(0),
    },
];

const LIBRE_PARAMS: &[ParamDecl] = &[
    ParamDecl {
        name: "selection_ratio",
        domain: Domain::Real {
            min: 0.0,
            max: 1.0,
            log: false,
        },
        default: DefaultValue::Real(0.7),
    },
    ParamDecl {
        name: "seed",
        domain: SEED_DOMAIN,
        default: DefaultValue::Int(0),
    },
];

/// One base learner, or LiBRe's candidate list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MlcBase {
    Single(LearnerSpec),
    Candidates(Vec<LearnerSpec>),
}

/// A multi-label learner with its base learner(s).
///
/// Seed parameters (`order_seed`, `seed`) that are absent are derived from
/// the fit seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlcSpec {
    pub name: MlcKind,
    #[serde(default)]
    pub params: ParamMap,
    pub base: MlcBase,
}

impl MlcSpec {
    pub fn new(name: MlcKind, base: LearnerSpec) -> Self {
        MlcSpec {
            name,
            params: ParamMap::new(),
            base: MlcBase::Single(base),
        }
    }

    pub fn libre(candidates: Vec<LearnerSpec>) -> Self {
        MlcSpec {
            name: MlcKind::Libre,
            params: ParamMap::new(),
            base: MlcBase::Candidates(candidates),
        }
    }

    pub fn with(mut self, param: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(param.to_string(), value.into());
        self
    }

    /// Validates the spec and fills defaults. Seed parameters that were not
    /// given become `seed >> 1`, which always fits a non-negative `i64`.
    pub fn resolved(&self, seed: u64) -> Result<MlcSpec, MlcError> {
        let mut params =
            resolve(self.name.params(), &self.params).map_err(|p| MlcError::InvalidSpec(format!("parameter '{p}'")))?;
        for key in ["order_seed", "seed"] {
            if params.contains_key(key) && !self.params.contains_key(key) {
                params.insert(key.into(), ParamValue::Int((seed >> 1) as i64));
            }
        }
        if let Some(r) = params.get("selection_ratio").and_then(ParamValue::as_f64) {
            if r <= 0.0 || r >= 1.0 {
                return Err(MlcError::InvalidSpec("selection_ratio must lie in (0, 1)".into()));
            }
        }
        let base = match (&self.base, self.name) {
            (MlcBase::Candidates(c), MlcKind::Libre) if c.is_empty() => {
                return Err(MlcError::InvalidSpec("libre needs at least one candidate".into()))
            }
            (MlcBase::Candidates(c), MlcKind::Libre) => {
                MlcBase::Candidates(c.iter().map(LearnerSpec::resolved).collect::<Result<_, _>>()?)
            }
            (MlcBase::Single(b), MlcKind::Libre) => MlcBase::Candidates(vec![b.resolved()?]),
            (MlcBase::Single(b), _) => MlcBase::Single(b.resolved()?),
            (MlcBase::Candidates(_), kind) => {
                return Err(MlcError::InvalidSpec(format!("{kind} takes a single base learner")))
            }
        };
        Ok(MlcSpec {
            name: self.name,
            params,
            base,
        })
    }

    fn int(&self, name: &str) -> i64 {
        self.params[name].as_i64().expect("resolved integer parameter")
    }

    fn single_base(&self) -> &LearnerSpec {
        match &self.base {
            MlcBase::Single(b) => b,
            MlcBase::Candidates(c) => &c[0],
        }
    }
}

/// A fitted classifier chain: `models[t]` predicts label `order[t]`.
#[derive(Debug, Clone)]
pub struct Chain {
    pub order: Vec<usize>,
    models: Vec<Model>,
}

/// Per-label outcome of LiBRe's internal selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelSelection {
    /// Selection-validation error rate per candidate; `None` if the fit failed.
    pub errors: Vec<Option<f64>>,
    pub chosen: usize,
}

#[derive(Debug, Clone)]
enum MlcState {
    Br(Vec<Model>),
    Libre {
        models: Vec<Model>,
        choices: Vec<LearnerSpec>,
        selection: Vec<LabelSelection>,
    },
    Cc(Chain),
    Ecc(Vec<Chain>),
    Lp {
        model: Model,
        labelsets: Vec<Vec<u8>>,
    },
}

/// A fitted multi-label classifier. Immutable after fitting.
#[derive(Debug, Clone)]
pub struct MlcModel {
    spec: MlcSpec,
    n_labels: usize,
    n_features: usize,
    state: MlcState,
}

impl MlcModel {
    pub fn spec(&self) -> &MlcSpec {
        &self.spec
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// LiBRe's chosen learner per label.
    pub fn libre_choices(&self) -> Option<&[LearnerSpec]> {
        match &self.state {
            MlcState::Libre { choices, .. } => Some(choices),
            _ => None,
        }
    }

    /// LiBRe's selection table, one entry per label.
    pub fn libre_selection(&self) -> Option<&[LabelSelection]> {
        match &self.state {
            MlcState::Libre { selection, .. } => Some(selection),
            _ => None,
        }
    }

    /// The label order of a single chain.
    pub fn chain_order(&self) -> Option<&[usize]> {
        match &self.state {
            MlcState::Cc(chain) => Some(&chain.order),
            _ => None,
        }
    }

    /// Label orders of every chain in an ensemble (or of the single chain).
    pub fn chain_orders(&self) -> Vec<Vec<usize>> {
        match &self.state {
            MlcState::Cc(chain) => vec![chain.order.clone()],
            MlcState::Ecc(chains) => chains.iter().map(|c| c.order.clone()).collect(),
            _ => Vec::new(),
        }
    }

    /// LP's class dictionary: class index to label vector.
    pub fn labelsets(&self) -> Option<&[Vec<u8>]> {
        match &self.state {
            MlcState::Lp { labelsets, .. } => Some(labelsets),
            _ => None,
        }
    }
}

fn label_targets(y: ArrayView2<u8>, j: usize) -> Vec<usize> {
    y.column(j).iter().map(|&v| v as usize).collect()
}

fn fit_binary(
    base: &LearnerSpec,
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    j: usize,
    seed: u64,
    deadline: &Deadline,
) -> Result<Model, MlcError> {
    fit_learner_until(base, x, &label_targets(y, j), seed, deadline)
        .map_err(|source| MlcError::Label { label: j, source })
}

fn fit_br_models(
    base: &LearnerSpec,
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    seed: u64,
    deadline: &Deadline,
) -> Result<Vec<Model>, MlcError> {
    (0..y.ncols())
        .map(|j| fit_binary(base, x, y, j, derive_seed(seed, j as u64), deadline))
        .collect()
}

fn error_rate(model: &Model, x: ArrayView2<f64>, truth: &[usize], deadline: &Deadline) -> Result<f64, LearnError> {
    let p = class_probability(model, x, 1, deadline)?;
    let wrong = p
        .iter()
        .zip(truth)
        .filter(|(&pi, &t)| usize::from(pi >= 0.5) != t)
        .count();
    Ok(wrong as f64 / truth.len() as f64)
}

fn fit_libre_models(
    candidates: &[LearnerSpec],
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    ratio: f64,
    seed: u64,
    deadline: &Deadline,
) -> Result<MlcState, MlcError> {
    let split = split_indices(x.nrows(), ratio, seed).ok();
    let mut models = Vec::with_capacity(y.ncols());
    let mut choices = Vec::with_capacity(y.ncols());
    let mut selection = Vec::with_capacity(y.ncols());
    for j in 0..y.ncols() {
        let label_seed = derive_seed(seed, j as u64);
        let errors: Vec<Option<f64>> = match &split {
            Some((train, val)) => {
                let (xt, xv) = (x.select(Axis(0), train), x.select(Axis(0), val));
                let yt: Vec<usize> = train.iter().map(|&i| y[[i, j]] as usize).collect();
                let yv: Vec<usize> = val.iter().map(|&i| y[[i, j]] as usize).collect();
                let mut errs = Vec::with_capacity(candidates.len());
                for c in candidates {
                    let e = fit_learner_until(c, xt.view(), &yt, label_seed, deadline)
                        .and_then(|m| error_rate(&m, xv.view(), &yv, deadline));
                    match e {
                        Err(LearnError::Timeout) => {
                            return Err(MlcError::Label {
                                label: j,
                                source: LearnError::Timeout,
                            })
                        }
                        e => errs.push(e.ok()),
                    }
                }
                errs
            }
            // Too few rows to split: every candidate ties.
            None => vec![Some(0.0); candidates.len()],
        };
        let mut ranked: Vec<usize> = (0..candidates.len()).filter(|&c| errors[c].is_some()).collect();
        ranked.sort_by(|&a, &b| errors[a].partial_cmp(&errors[b]).expect("finite").then(a.cmp(&b)));
        let mut fitted = None;
        for &c in &ranked {
            match fit_binary(&candidates[c], x, y, j, label_seed, deadline) {
                Ok(m) => {
                    fitted = Some((c, m));
                    break;
                }
                Err(e) if e.is_timeout() => return Err(e),
                Err(_) => {}
            }
        }
        let Some((chosen, model)) = fitted else {
            return Err(MlcError::AllCandidatesFailed(j));
        };
        models.push(model);
        choices.push(candidates[chosen].clone());
        selection.push(LabelSelection { errors, chosen });
    }
    Ok(MlcState::Libre {
        models,
        choices,
        selection,
    })
}

/// Seeded random permutation of `0..m`.
pub fn chain_order(m: usize, order_seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng_from_seed(order_seed));
    order
}

fn as_features(y: ArrayView2<u8>, cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((y.nrows(), cols.len()), |(i, c)| f64::from(y[[i, cols[c]]]))
}

fn fit_chain(
    base: &LearnerSpec,
    order: Vec<usize>,
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    seed: u64,
    deadline: &Deadline,
) -> Result<Chain, MlcError> {
    let mut models = Vec::with_capacity(order.len());
    for (t, &label) in order.iter().enumerate() {
        let aug = concatenate(Axis(1), &[x, as_features(y, &order[..t]).view()]).expect("same row count");
        let model = fit_learner_until(
            base,
            aug.view(),
            &label_targets(y, label),
            derive_seed(seed, t as u64),
            deadline,
        )
        .map_err(|source| MlcError::ChainPosition {
            position: t,
            label,
            source,
        })?;
        models.push(model);
    }
    Ok(Chain { order, models })
}

impl Chain {
    /// Scores in canonical label order; preceding labels are fed forward as
    /// hard predictions at `tau`.
    fn predict(&self, x: ArrayView2<f64>, tau: f64, deadline: &Deadline) -> Result<Array2<f64>, MlcError> {
        let m = self.order.len();
        let mut scores = Array2::zeros((x.nrows(), m));
        let mut fed = Array2::<f64>::zeros((x.nrows(), 0));
        for (t, (&label, model)) in self.order.iter().zip(&self.models).enumerate() {
            let aug = concatenate(Axis(1), &[x, fed.view()]).expect("same row count");
            let p = class_probability(model, aug.view(), 1, deadline).map_err(|source| MlcError::ChainPosition {
                position: t,
                label,
                source,
            })?;
            let hard: Array2<f64> = Array2::from_shape_fn((x.nrows(), 1), |(i, _)| if p[i] >= tau { 1.0 } else { 0.0 });
            fed = concatenate(Axis(1), &[fed.view(), hard.view()]).expect("same row count");
            for (i, pi) in p.into_iter().enumerate() {
                scores[[i, label]] = pi;
            }
        }
        Ok(scores)
    }
}

fn fit_lp_model(
    base: &LearnerSpec,
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    seed: u64,
    deadline: &Deadline,
) -> Result<MlcState, MlcError> {
    let mut labelsets: Vec<Vec<u8>> = Vec::new();
    let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
    let classes: Vec<usize> = y
        .rows()
        .into_iter()
        .map(|r| {
            let v = r.to_vec();
            *index.entry(v.clone()).or_insert_with(|| {
                labelsets.push(v);
                labelsets.len() - 1
            })
        })
        .collect();
    let model = fit_learner_until(base, x, &classes, seed, deadline)?;
    Ok(MlcState::Lp { model, labelsets })
}

fn check_shapes(x: ArrayView2<f64>, y: ArrayView2<u8>) -> Result<(), MlcError> {
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(LearnError::EmptyData.into());
    }
    if x.nrows() != y.nrows() {
        return Err(LearnError::LengthMismatch {
            rows: x.nrows(),
            labels: y.nrows(),
        }
        .into());
    }
    Ok(())
}

/// Fits any multi-label learner on raw feature and label matrices.
pub fn fit_mlc_until(
    spec: &MlcSpec,
    x: ArrayView2<f64>,
    y: ArrayView2<u8>,
    seed: u64,
    deadline: &Deadline,
) -> Result<MlcModel, MlcError> {
    check_shapes(x, y)?;
    let spec = spec.resolved(seed)?;
    let state = match spec.name {
        MlcKind::Br => MlcState::Br(fit_br_models(spec.single_base(), x, y, seed, deadline)?),
        MlcKind::Libre => {
            let MlcBase::Candidates(candidates) = &spec.base else {
                unreachable!("resolved libre spec has candidates")
            };
            let ratio = spec.params["selection_ratio"].as_f64().expect("resolved ratio");
            fit_libre_models(candidates, x, y, ratio, spec.int("seed") as u64, deadline)?
        }
        MlcKind::Cc => {
            let order = chain_order(y.ncols(), spec.int("order_seed") as u64);
            MlcState::Cc(fit_chain(spec.single_base(), order, x, y, seed, deadline)?)
        }
        MlcKind::Ecc => {
            let master = spec.int("seed") as u64;
            let chains = (0..spec.int("ensemble_size") as u64)
                .map(|t| {
                    let member = derive_seed(master, t);
                    fit_chain(
                        spec.single_base(),
                        chain_order(y.ncols(), member),
                        x,
                        y,
                        member,
                        deadline,
                    )
                })
                .collect::<Result<_, _>>()?;
            MlcState::Ecc(chains)
        }
        MlcKind::Lp => fit_lp_model(spec.single_base(), x, y, seed, deadline)?,
    };
    Ok(MlcModel {
        spec,
        n_labels: y.ncols(),
        n_features: x.ncols(),
        state,
    })
}

pub fn fit_mlc(spec: &MlcSpec, ds: &Dataset, seed: u64) -> Result<MlcModel, MlcError> {
    fit_mlc_until(spec, ds.features.view(), ds.labels.view(), seed, &Deadline::never())
}

pub fn fit_br(base: &LearnerSpec, ds: &Dataset, seed: u64) -> Result<MlcModel, MlcError> {
    fit_mlc(&MlcSpec::new(MlcKind::Br, base.clone()), ds, seed)
}

pub fn fit_libre(
    candidates: &[LearnerSpec],
    ds: &Dataset,
    selection_ratio: f64,
    seed: u64,
) -> Result<MlcModel, MlcError> {
    let spec = MlcSpec::libre(candidates.to_vec())
        .with("selection_ratio", selection_ratio)
        .with("seed", (seed >> 1) as i64);
    fit_mlc(&spec, ds, seed)
}

pub fn fit_cc(base: &LearnerSpec, order_seed: u64, ds: &Dataset, seed: u64) -> Result<MlcModel, MlcError> {
    let spec = MlcSpec::new(MlcKind::Cc, base.clone()).with("order_seed", (order_seed >> 1) as i64);
    fit_mlc(&spec, ds, seed)
}

/// A single chain with an explicit label order.
pub fn fit_cc_with_order(base: &LearnerSpec, order: &[usize], ds: &Dataset, seed: u64) -> Result<MlcModel, MlcError> {
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..ds.n_labels()).collect::<Vec<_>>() {
        return Err(MlcError::InvalidSpec(format!("{order:?} is not a label permutation")));
    }
    let spec = MlcSpec::new(MlcKind::Cc, base.clone()).resolved(seed)?;
    let chain = fit_chain(
        spec.single_base(),
        order.to_vec(),
        ds.features.view(),
        ds.labels.view(),
        seed,
        &Deadline::never(),
    )?;
    Ok(MlcModel {
        spec,
        n_labels: ds.n_labels(),
        n_features: ds.n_features(),
        state: MlcState::Cc(chain),
    })
}

pub fn fit_ecc(base: &LearnerSpec, ensemble_size: usize, seed: u64, ds: &Dataset) -> Result<MlcModel, MlcError> {
    let spec = MlcSpec::new(MlcKind::Ecc, base.clone())
        .with("ensemble_size", ensemble_size as i64)
        .with("seed", (seed >> 1) as i64);
    fit_mlc(&spec, ds, seed)
}

pub fn fit_lp(base_multiclass: &LearnerSpec, ds: &Dataset, seed: u64) -> Result<MlcModel, MlcError> {
    fit_mlc(&MlcSpec::new(MlcKind::Lp, base_multiclass.clone()), ds, seed)
}

fn binary_scores(models: &[Model], x: ArrayView2<f64>, deadline: &Deadline) -> Result<Array2<f64>, MlcError> {
    let mut scores = Array2::zeros((x.nrows(), models.len()));
    for (j, model) in models.iter().enumerate() {
        let p = class_probability(model, x, 1, deadline).map_err(|source| MlcError::Label { label: j, source })?;
        scores.column_mut(j).assign(&ndarray::Array1::from(p));
    }
    Ok(scores)
}

/// Per-label scores and hard predictions.
///
/// Hard predictions are `scores >= tau`, except for label powerset, whose
/// hard prediction is the label vector of the most probable class (ties
/// toward the larger vector) and so always occurs in the training data.
pub fn predict_mlc_until(
    model: &MlcModel,
    x: ArrayView2<f64>,
    tau: f64,
    deadline: &Deadline,
) -> Result<(Array2<f64>, Array2<u8>), MlcError> {
    if x.ncols() != model.n_features {
        return Err(MlcError::DimensionMismatch {
            expected: model.n_features,
            found: x.ncols(),
        });
    }
    let scores = match &model.state {
        MlcState::Br(models) | MlcState::Libre { models, .. } => binary_scores(models, x, deadline)?,
        MlcState::Cc(chain) => chain.predict(x, tau, deadline)?,
        MlcState::Ecc(chains) => {
            let mut sum = Array2::<f64>::zeros((x.nrows(), model.n_labels));
            for chain in chains {
                sum += &chain.predict(x, tau, deadline)?;
            }
            sum / chains.len() as f64
        }
        MlcState::Lp { model: lp, labelsets } => {
            let probs = predict_scores_until(lp, x, deadline)?;
            let vectors: Vec<&Vec<u8>> = lp.class_labels().iter().map(|&c| &labelsets[c]).collect();
            let mut scores = Array2::<f64>::zeros((x.nrows(), model.n_labels));
            let mut hard = Array2::<u8>::zeros((x.nrows(), model.n_labels));
            for (i, row) in probs.rows().into_iter().enumerate() {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    for (j, &bit) in vectors[c].iter().enumerate() {
                        if bit == 1 {
                            scores[[i, j]] += p;
                        }
                    }
                    if p > row[best] || (p == row[best] && vectors[c] > vectors[best]) {
                        best = c;
                    }
                }
                for (j, &bit) in vectors[best].iter().enumerate() {
                    hard[[i, j]] = bit;
                }
            }
            scores.mapv_inplace(|v| v.clamp(0.0, 1.0));
            return Ok((scores, hard));
        }
    };
    let hard = threshold_scores(&scores, tau)?;
    Ok((scores, hard))
}

pub fn predict_mlc(model: &MlcModel, x: ArrayView2<f64>, tau: f64) -> Result<(Array2<f64>, Array2<u8>), MlcError> {
    predict_mlc_until(model, x, tau, &Deadline::never())
}

/// Hard class predictions of a binary model as a 0/1 column.
pub fn binary_hard(model: &Model, x: ArrayView2<f64>, tau: f64) -> Result<Vec<u8>, LearnError> {
    let p = class_probability(model, x, 1, &Deadline::never())?;
    Ok(p.into_iter().map(|v| u8::from(v >= tau)).collect())
}
