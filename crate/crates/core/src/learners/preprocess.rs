//! Column-wise feature preprocessors with fit/apply separation.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::LearnError;
use crate::params::{resolve, DefaultValue, Domain, ParamDecl, ParamMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessorKind {
    Standardize,
    Minmax,
    VarianceThreshold,
}

impl PreprocessorKind {
    pub const ALL: [PreprocessorKind; 3] = [
        PreprocessorKind::Standardize,
        PreprocessorKind::Minmax,
        PreprocessorKind::VarianceThreshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PreprocessorKind::Standardize => "standardize",
            PreprocessorKind::Minmax => "minmax",
            PreprocessorKind::VarianceThreshold => "variance_threshold",
        }
    }

    pub fn from_name(name: &str) -> Option<PreprocessorKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn params(self) -> &'static [ParamDecl] {
        match self {
            PreprocessorKind::VarianceThreshold => VARIANCE_PARAMS,
            _ => &[],
        }
    }
}

impl fmt::Display for PreprocessorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const VARIANCE_PARAMS: &[ParamDecl] = &[ParamDecl {
    name: "threshold",
    domain: Domain::Real {
        min: 0.0,
        max: 1.0,
        log: false,
    },
    default: DefaultValue::Real(0.0),
}];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessorSpec {
    pub name: PreprocessorKind,
    #[serde(default)]
    pub params: ParamMap,
}

impl PreprocessorSpec {
    pub fn new(name: PreprocessorKind) -> Self {
        PreprocessorSpec {
            name,
            params: ParamMap::new(),
        }
    }
}

/// Fitted preprocessor. The output never has more columns than the input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Transform {
    /// `(x - offset) / scale` per column.
    Affine { offset: Array1<f64>, scale: Array1<f64> },
    /// Keeps the listed input columns, in ascending order.
    Select { columns: Vec<usize> },
}

impl Transform {
    pub fn output_columns(&self, input: usize) -> usize {
        match self {
            Transform::Affine { .. } => input,
            Transform::Select { columns } => columns.len(),
        }
    }
}

pub fn fit_preprocessor(
    kind: PreprocessorKind,
    params: &ParamMap,
    x: ArrayView2<f64>,
) -> Result<Transform, LearnError> {
    let params = resolve(kind.params(), params).map_err(LearnError::InvalidParam)?;
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(LearnError::EmptyData);
    }
    let var = x.var_axis(Axis(0), 0.0);
    Ok(match kind {
        PreprocessorKind::Standardize => Transform::Affine {
            offset: x.mean_axis(Axis(0)).expect("non-empty"),
            scale: var.mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 }),
        },
        PreprocessorKind::Minmax => {
            let lo = x.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
            let hi = x.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
            let scale = (&hi - &lo).mapv(|r| if r > 0.0 { r } else { 1.0 });
            Transform::Affine { offset: lo, scale }
        }
        PreprocessorKind::VarianceThreshold => {
            let threshold = params["threshold"].as_f64().expect("resolved threshold");
            let mut columns: Vec<usize> = (0..var.len()).filter(|&j| var[j] > threshold).collect();
            if columns.is_empty() {
                let best = (0..var.len()).fold(0, |b, j| if var[j] > var[b] { j } else { b });
                columns.push(best);
            }
            Transform::Select { columns }
        }
    })
}

pub fn apply_transform(t: &Transform, x: ArrayView2<f64>) -> Result<Array2<f64>, LearnError> {
    match t {
        Transform::Affine { offset, scale } => {
            if x.ncols() != offset.len() {
                return Err(LearnError::DimensionMismatch {
                    expected: offset.len(),
                    found: x.ncols(),
                });
            }
            Ok((&x - offset) / scale)
        }
        Transform::Select { columns } => {
            let needed = columns.last().map_or(0, |c| c + 1);
            if x.ncols() < needed {
                return Err(LearnError::DimensionMismatch {
                    expected: needed,
                    found: x.ncols(),
                });
            }
            Ok(x.select(Axis(1), columns))
        }
    }
}
