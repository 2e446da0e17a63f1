//! Single-label base learners behind one fit/predict contract.
//!
//! Every learner takes a feature matrix and a vector of class indices and
//! produces a [`Model`] whose scores are probability vectors over the classes
//! seen during training. Training data with a single class always yields a
//! constant model, whatever the learner.

mod knn;
pub mod logistic;
mod naive_bayes;
pub mod nested;
pub mod preprocess;
mod tree;

use std::fmt;
use std::time::Duration;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::deadline::{Deadline, DeadlineExceeded};
use crate::params::{resolve, DefaultValue, Domain, ParamDecl, ParamMap, ParamValue};

pub use nested::{sample_dichotomy, NdTree};
pub use preprocess::{apply_transform, fit_preprocessor, PreprocessorKind, PreprocessorSpec, Transform};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("training data is empty")]
    EmptyData,
    #[error("invalid parameter '{0}'")]
    InvalidParam(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("expected {expected} feature columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("label vector length {labels} does not match {rows} rows")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("evaluation deadline exceeded")]
    Timeout,
}

impl From<DeadlineExceeded> for LearnError {
    fn from(_: DeadlineExceeded) -> Self {
        LearnError::Timeout
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Logistic,
    Tree,
    GaussianNb,
    Knn,
    NdEnsemble,
    /// Test fixture: sleeps for `millis`, then predicts class frequencies.
    Sleep,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 6] = [
        LearnerKind::Logistic,
        LearnerKind::Tree,
        LearnerKind::GaussianNb,
        LearnerKind::Knn,
        LearnerKind::NdEnsemble,
        LearnerKind::Sleep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Logistic => "logistic",
            LearnerKind::Tree => "tree",
            LearnerKind::GaussianNb => "gaussian_nb",
            LearnerKind::Knn => "knn",
            LearnerKind::NdEnsemble => "nd_ensemble",
            LearnerKind::Sleep => "sleep",
        }
    }

    pub fn from_name(name: &str) -> Option<LearnerKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Declared hyper-parameters with their domains and defaults.
    pub fn params(self) -> &'static [ParamDecl] {
        match self {
            LearnerKind::Logistic => LOGISTIC_PARAMS,
            LearnerKind::Tree => TREE_PARAMS,
            LearnerKind::GaussianNb => NB_PARAMS,
            LearnerKind::Knn => KNN_PARAMS,
            LearnerKind::NdEnsemble => ND_PARAMS,
            LearnerKind::Sleep => SLEEP_PARAMS,
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const LOGISTIC_PARAMS: &[ParamDecl] = &[
    ParamDecl {
        name: "learning_rate",
        domain: Domain::Real {
            min: 1e-4,
            max: 1.0,
            log: true,
        },
        default: DefaultValue::Real(0.1),
    },
    ParamDecl {
        name: "iterations",
        domain: Domain::Int { min: 50, max: 1000 },
        default: DefaultValue::Int(300),
    },
    ParamDecl {
        name: "l2",
        domain: Domain::Real {
            min: 0.0,
            max: 1.0,
            log: false,
        },
        default: DefaultValue::Real(1e-3),
    },
];

const TREE_PARAMS: &[ParamDecl] = &[
    ParamDecl {
        name: "max_depth",
        domain: Domain::Int { min: 1, max: 12 },
        default: DefaultValue::Int(6),
    },
    ParamDecl {
        name: "min_leaf",
        domain: Domain::Int { min: 1, max: 20 },
        default: DefaultValue::Int(1),
    },
];

const NB_PARAMS: &[ParamDecl] = &[ParamDecl {
    name: "var_smoothing",
    domain: Domain::Real {
        min: 1e-12,
        max: 1e-3,
        log: true,
    },
    default: DefaultValue::Real(1e-9),
}];

const KNN_PARAMS: &[ParamDecl] = &[
    ParamDecl {
        name: "k",
        domain: Domain::Int { min: 1, max: 25 },
        default: DefaultValue::Int(5),
    },
    ParamDecl {
        name: "distance",
        domain: Domain::Choice(&["euclidean", "manhattan"]),
        default: DefaultValue::Choice("euclidean"),
    },
];

const ND_PARAMS: &[ParamDecl] = &[ParamDecl {
    name: "ensemble_size",
    domain: Domain::Int { min: 1, max: 50 },
    default: DefaultValue::Int(5),
}];

const SLEEP_PARAMS: &[ParamDecl] = &[ParamDecl {
    name: "millis",
    domain: Domain::Int { min: 0, max: 3_600_000 },
    default: DefaultValue::Int(5000),
}];

/// A learner name with its hyper-parameters, optionally wrapping a nested
/// learner (the binary learner inside `nd_ensemble`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub name: LearnerKind,
    #[serde(default)]
    pub params: ParamMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nested: Option<Box<LearnerSpec>>,
}

impl LearnerSpec {
    pub fn new(name: LearnerKind) -> Self {
        LearnerSpec {
            name,
            params: ParamMap::new(),
            nested: None,
        }
    }

    pub fn with(mut self, param: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(param.to_string(), value.into());
        self
    }

    pub fn with_nested(mut self, inner: LearnerSpec) -> Self {
        self.nested = Some(Box::new(inner));
        self
    }

    /// Validates parameters (recursively) and fills defaults.
    pub fn resolved(&self) -> Result<LearnerSpec, LearnError> {
        let params = resolve(self.name.params(), &self.params).map_err(LearnError::InvalidParam)?;
        let nested = match (&self.nested, self.name) {
            (Some(inner), LearnerKind::NdEnsemble) => Some(Box::new(inner.resolved()?)),
            (None, LearnerKind::NdEnsemble) => Some(Box::new(LearnerSpec::new(LearnerKind::Logistic).resolved()?)),
            (Some(_), _) => return Err(LearnError::InvalidParam("nested".into())),
            (None, _) => None,
        };
        Ok(LearnerSpec {
            name: self.name,
            params,
            nested,
        })
    }

    fn real(&self, name: &str) -> f64 {
        self.params[name].as_f64().expect("resolved real parameter")
    }

    fn int(&self, name: &str) -> i64 {
        self.params[name].as_i64().expect("resolved integer parameter")
    }

    fn text(&self, name: &str) -> &str {
        self.params[name].as_str().expect("resolved choice parameter")
    }
}

#[derive(Debug, Clone)]
enum ModelState {
    /// Fixed class distribution (single-class fits and the sleep fixture).
    Prior(Vec<f64>),
    Logistic(logistic::LogisticModel),
    Tree(tree::TreeModel),
    NaiveBayes(naive_bayes::NaiveBayesModel),
    Knn(knn::KnnModel),
    Nd(nested::NdEnsembleModel),
}

/// A fitted single-label classifier. Immutable after fitting.
#[derive(Debug, Clone)]
pub struct Model {
    spec: LearnerSpec,
    class_labels: Vec<usize>,
    n_features: usize,
    state: ModelState,
}

impl Model {
    /// Training classes in ascending order; score columns follow this order.
    pub fn class_labels(&self) -> &[usize] {
        &self.class_labels
    }

    /// The learner with all parameters resolved.
    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_constant(&self) -> bool {
        self.class_labels.len() == 1
    }
}

/// Sorted distinct classes and each row's position among them.
pub(crate) fn encode_classes(y: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut classes: Vec<usize> = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let index = y
        .iter()
        .map(|c| classes.binary_search(c).expect("class present"))
        .collect();
    (classes, index)
}

pub fn fit_learner(spec: &LearnerSpec, x: ArrayView2<f64>, y: &[usize], seed: u64) -> Result<Model, LearnError> {
    fit_learner_until(spec, x, y, seed, &Deadline::never())
}

/// [`fit_learner`] with a cooperative deadline.
pub fn fit_learner_until(
    spec: &LearnerSpec,
    x: ArrayView2<f64>,
    y: &[usize],
    seed: u64,
    deadline: &Deadline,
) -> Result<Model, LearnError> {
    let spec = spec.resolved()?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(LearnError::EmptyData);
    }
    if x.nrows() != y.len() {
        return Err(LearnError::LengthMismatch {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    let (class_labels, yi) = encode_classes(y);
    let k = class_labels.len();
    let state = if spec.name == LearnerKind::Sleep {
        sleep_until(spec.int("millis") as u64, deadline)?;
        let mut prior = vec![0.0; k];
        for &c in &yi {
            prior[c] += 1.0;
        }
        prior.iter_mut().for_each(|p| *p /= yi.len() as f64);
        ModelState::Prior(prior)
    } else if k == 1 {
        ModelState::Prior(vec![1.0])
    } else {
        match spec.name {
            LearnerKind::Logistic => ModelState::Logistic(logistic::LogisticModel::fit(
                x,
                &yi,
                k,
                spec.real("learning_rate"),
                spec.int("iterations") as usize,
                spec.real("l2"),
                deadline,
            )?),
            LearnerKind::Tree => ModelState::Tree(tree::TreeModel::fit(
                x,
                &yi,
                k,
                spec.int("max_depth") as usize,
                spec.int("min_leaf") as usize,
                deadline,
            )?),
            LearnerKind::GaussianNb => ModelState::NaiveBayes(naive_bayes::NaiveBayesModel::fit(
                x,
                &yi,
                k,
                spec.real("var_smoothing"),
            )?),
            LearnerKind::Knn => ModelState::Knn(knn::KnnModel::fit(
                x,
                &yi,
                k,
                spec.int("k") as usize,
                spec.text("distance") == "manhattan",
            )),
            LearnerKind::NdEnsemble => ModelState::Nd(nested::NdEnsembleModel::fit(
                spec.nested.as_deref().expect("resolved nested learner"),
                x,
                &yi,
                k,
                spec.int("ensemble_size") as usize,
                seed,
                deadline,
            )?),
            LearnerKind::Sleep => unreachable!("handled above"),
        }
    };
    Ok(Model {
        spec,
        class_labels,
        n_features: x.ncols(),
        state,
    })
}

fn sleep_until(millis: u64, deadline: &Deadline) -> Result<(), LearnError> {
    let end = std::time::Instant::now() + Duration::from_millis(millis);
    loop {
        deadline.check()?;
        let now = std::time::Instant::now();
        if now >= end {
            return Ok(());
        }
        std::thread::sleep((end - now).min(Duration::from_millis(5)));
    }
}

/// Per-class probabilities, one row per query, columns in
/// [`Model::class_labels`] order.
pub fn predict_scores(model: &Model, x: ArrayView2<f64>) -> Result<Array2<f64>, LearnError> {
    predict_scores_until(model, x, &Deadline::never())
}

pub fn predict_scores_until(model: &Model, x: ArrayView2<f64>, deadline: &Deadline) -> Result<Array2<f64>, LearnError> {
    if x.ncols() != model.n_features {
        return Err(LearnError::DimensionMismatch {
            expected: model.n_features,
            found: x.ncols(),
        });
    }
    let scores = match &model.state {
        ModelState::Prior(p) => Array2::from_shape_fn((x.nrows(), p.len()), |(_, c)| p[c]),
        ModelState::Logistic(m) => m.predict(x),
        ModelState::Tree(m) => m.predict(x),
        ModelState::NaiveBayes(m) => m.predict(x),
        ModelState::Knn(m) => m.predict(x, deadline)?,
        ModelState::Nd(m) => m.predict(x, deadline)?,
    };
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(LearnError::NumericalFailure("non-finite score".into()));
    }
    Ok(scores)
}

/// Probability of `class` per query row (zero if the class was never seen).
pub fn class_probability(
    model: &Model,
    x: ArrayView2<f64>,
    class: usize,
    deadline: &Deadline,
) -> Result<Vec<f64>, LearnError> {
    let scores = predict_scores_until(model, x, deadline)?;
    Ok(match model.class_labels.iter().position(|&c| c == class) {
        Some(col) => scores.column(col).to_vec(),
        None => vec![0.0; x.nrows()],
    })
}

/// Index of the highest-scoring class per row (first on ties).
pub fn argmax_rows(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                )
                .0
        })
        .collect()
}

/// Hard class predictions (class labels, not column indices).
pub fn predict_classes(model: &Model, x: ArrayView2<f64>) -> Result<Vec<usize>, LearnError> {
    let scores = predict_scores(model, x)?;
    Ok(argmax_rows(&scores)
        .into_iter()
        .map(|i| model.class_labels[i])
        .collect())
}
