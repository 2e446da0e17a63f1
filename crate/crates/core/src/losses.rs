//! Multi-label loss functions on hard (0/1) prediction matrices.
//!
//! Every kind is a minimization target in `[0, 1]`; the F1 measures are
//! reported as `1 - F1`. An F1 term whose denominator is zero (true and
//! predicted sets both empty) counts as perfect agreement, `F1 = 1`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("non-binary entry at ({0}, {1})")]
    NonBinaryEntry(usize, usize),
    #[error("subset size k={k} outside 1..={m}")]
    KOutOfRange { k: usize, m: usize },
    #[error("score at ({0}, {1}) outside [0, 1]")]
    OutOfRangeScore(usize, usize),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown loss kind '{0}'")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LossKind {
    SubsetZeroOne,
    Hamming,
    F1Instance,
    F1Label,
    F1Micro,
    SubsetK(usize),
}

impl LossKind {
    /// The five kinds reported in every loss table.
    pub const CANONICAL: [LossKind; 5] = [
        LossKind::Hamming,
        LossKind::SubsetZeroOne,
        LossKind::F1Instance,
        LossKind::F1Label,
        LossKind::F1Micro,
    ];

    /// Short command-line name.
    pub fn name(&self) -> String {
        match self {
            LossKind::SubsetZeroOne => "subset01".into(),
            LossKind::Hamming => "hamming".into(),
            LossKind::F1Instance => "f1i".into(),
            LossKind::F1Label => "f1l".into(),
            LossKind::F1Micro => "f1micro".into(),
            LossKind::SubsetK(k) => format!("subset{k}"),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for LossKind {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "hamming" => LossKind::Hamming,
            "subset01" | "subset0/1" | "subset_zero_one" => LossKind::SubsetZeroOne,
            "f1i" | "f1_instance" => LossKind::F1Instance,
            "f1l" | "f1_label" => LossKind::F1Label,
            "f1micro" | "f1_micro" | "f1m" => LossKind::F1Micro,
            other => other
                .strip_prefix("subset")
                .and_then(|k| k.trim_start_matches(['-', '_', ':']).parse().ok())
                .map(LossKind::SubsetK)
                .ok_or_else(|| LossError::UnknownKind(s.to_string()))?,
        })
    }
}

impl From<LossKind> for String {
    fn from(k: LossKind) -> String {
        k.name()
    }
}

impl TryFrom<String> for LossKind {
    type Error = LossError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Maps scores to hard predictions: `1` iff `score >= tau`.
pub fn threshold_scores(scores: &Array2<f64>, tau: f64) -> Result<Array2<u8>, LossError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(LossError::InvalidThreshold(tau));
    }
    for ((i, j), &s) in scores.indexed_iter() {
        if !(0.0..=1.0).contains(&s) {
            return Err(LossError::OutOfRangeScore(i, j));
        }
    }
    Ok(scores.mapv(|s| u8::from(s >= tau)))
}

fn check_pair(y: ArrayView2<u8>, yhat: ArrayView2<u8>) -> Result<(), LossError> {
    if y.dim() != yhat.dim() {
        return Err(LossError::ShapeMismatch(y.dim(), yhat.dim()));
    }
    for m in [&y, &yhat] {
        if let Some(((i, j), _)) = m.indexed_iter().find(|(_, &v)| v > 1) {
            return Err(LossError::NonBinaryEntry(i, j));
        }
    }
    Ok(())
}

fn mismatches(y: ArrayView1<u8>, yhat: ArrayView1<u8>) -> usize {
    y.iter().zip(yhat.iter()).filter(|(a, b)| a != b).count()
}

/// `2 * tp / (|true| + |pred|)`, with `0/0 = 1`.
fn f1_term<T: Scalar>(y: ArrayView1<u8>, yhat: ArrayView1<u8>) -> T {
    let tp = y.iter().zip(yhat.iter()).filter(|(&a, &b)| a == 1 && b == 1).count();
    let denom = y.iter().chain(yhat.iter()).filter(|&&v| v == 1).count();
    if denom == 0 {
        T::one()
    } else {
        T::ratio(2 * tp, denom)
    }
}

fn mean<T: Scalar>(values: impl Iterator<Item = T>, n: usize) -> T {
    values.fold(T::zero(), |acc, v| acc + v) / T::from_count(n)
}

/// Loss of `yhat` against ground truth `y` (both `S x m`, entries 0/1).
pub fn compute_loss<T: Scalar>(kind: LossKind, y: &Array2<u8>, yhat: &Array2<u8>) -> Result<T, LossError> {
    compute_loss_view(kind, y.view(), yhat.view())
}

pub fn compute_loss_view<T: Scalar>(kind: LossKind, y: ArrayView2<u8>, yhat: ArrayView2<u8>) -> Result<T, LossError> {
    check_pair(y, yhat)?;
    let (s, m) = y.dim();
    let rows = || y.rows().into_iter().zip(yhat.rows());
    Ok(match kind {
        LossKind::SubsetZeroOne => mean(
            rows().map(|(a, b)| if mismatches(a, b) > 0 { T::one() } else { T::zero() }),
            s,
        ),
        LossKind::Hamming => mean(rows().map(|(a, b)| T::ratio(mismatches(a, b), m)), s),
        LossKind::F1Instance => T::one() - mean(rows().map(|(a, b)| f1_term::<T>(a, b)), s),
        LossKind::F1Label => {
            let cols = y.columns().into_iter().zip(yhat.columns());
            T::one() - mean(cols.map(|(a, b)| f1_term::<T>(a, b)), m)
        }
        LossKind::F1Micro => {
            let flat_y: Vec<u8> = y.iter().copied().collect();
            let flat_p: Vec<u8> = yhat.iter().copied().collect();
            T::one() - f1_term::<T>(ArrayView1::from(&flat_y), ArrayView1::from(&flat_p))
        }
        LossKind::SubsetK(k) => subset_k_view(y, yhat, k)?,
    })
}

/// Largest label count for which subset-k losses enumerate subsets directly.
pub const SUBSET_ENUMERATION_LIMIT: usize = 20;

/// Average, over instances, of the fraction of size-`k` label subsets on
/// which prediction and truth disagree.
pub fn subset_k_loss<T: Scalar>(y: &Array2<u8>, yhat: &Array2<u8>, k: usize) -> Result<T, LossError> {
    check_pair(y.view(), yhat.view())?;
    subset_k_view(y.view(), yhat.view(), k)
}

fn subset_k_view<T: Scalar>(y: ArrayView2<u8>, yhat: ArrayView2<u8>, k: usize) -> Result<T, LossError> {
    let (s, m) = y.dim();
    if k == 0 || k > m {
        return Err(LossError::KOutOfRange { k, m });
    }
    let per_row = |(a, b): (ArrayView1<u8>, ArrayView1<u8>)| {
        if m <= SUBSET_ENUMERATION_LIMIT {
            subset_fraction_enumerated::<T>(a, b, k)
        } else {
            subset_fraction_closed_form::<T>(m, mismatches(a, b), k)
        }
    };
    Ok(mean(y.rows().into_iter().zip(yhat.rows()).map(per_row), s))
}

/// Walks every size-`k` subset of the `m <= 20` labels (Gosper's hack).
fn subset_fraction_enumerated<T: Scalar>(y: ArrayView1<u8>, yhat: ArrayView1<u8>, k: usize) -> T {
    let m = y.len();
    let wrong: u32 = y
        .iter()
        .zip(yhat.iter())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .fold(0, |acc, (j, _)| acc | (1 << j));
    let limit: u32 = 1 << m;
    let mut subset: u32 = (1 << k) - 1;
    let (mut total, mut bad) = (0usize, 0usize);
    while subset < limit {
        total += 1;
        if subset & wrong != 0 {
            bad += 1;
        }
        let c = subset & subset.wrapping_neg();
        let r = subset + c;
        subset = (((r ^ subset) >> 2) / c) | r;
    }
    T::ratio(bad, total)
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `1 - C(m - e, k) / C(m, k)` for an instance with `e` wrong labels.
pub fn subset_fraction_closed_form<T: Scalar>(m: usize, e: usize, k: usize) -> T {
    if let (Some(all), Some(clean)) = (binomial(m, k), binomial(m - e, k)) {
        let num = T::from_u128(all - clean);
        let den = T::from_u128(all);
        if let (Some(num), Some(den)) = (num, den) {
            return num / den;
        }
    }
    let mut keep = T::one();
    for i in 0..k {
        if m - e < i + 1 {
            return T::one();
        }
        keep = keep * T::ratio(m - e - i, m - i);
    }
    T::one() - keep
}

/// The five canonical losses of one prediction matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    pub hamming: f64,
    pub subset01: f64,
    pub f1_instance: f64,
    pub f1_label: f64,
    pub f1_micro: f64,
}

impl LossTable {
    pub fn compute(y: &Array2<u8>, yhat: &Array2<u8>) -> Result<LossTable, LossError> {
        Ok(LossTable {
            hamming: compute_loss(LossKind::Hamming, y, yhat)?,
            subset01: compute_loss(LossKind::SubsetZeroOne, y, yhat)?,
            f1_instance: compute_loss(LossKind::F1Instance, y, yhat)?,
            f1_label: compute_loss(LossKind::F1Label, y, yhat)?,
            f1_micro: compute_loss(LossKind::F1Micro, y, yhat)?,
        })
    }

    pub fn get(&self, kind: LossKind) -> Option<f64> {
        match kind {
            LossKind::Hamming => Some(self.hamming),
            LossKind::SubsetZeroOne => Some(self.subset01),
            LossKind::F1Instance => Some(self.f1_instance),
            LossKind::F1Label => Some(self.f1_label),
            LossKind::F1Micro => Some(self.f1_micro),
            LossKind::SubsetK(_) => None,
        }
    }
}
