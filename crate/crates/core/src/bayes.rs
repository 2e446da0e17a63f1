//! Explicit label-vector distributions, expected losses and brute-force
//! Bayes-optimal predictions.

use ndarray::Array2;
use num_rational::Ratio;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::losses::{compute_loss, LossError, LossKind};
use crate::scalar::Scalar;

/// Largest label count the brute-force routines will enumerate.
pub const MAX_BRUTE_FORCE_LABELS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BayesError {
    #[error("distribution is empty")]
    EmptySupport,
    #[error("support vectors must have length {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("label vector {0:?} appears twice in the support")]
    DuplicateVector(Vec<u8>),
    #[error("label entries must be 0 or 1")]
    NonBinary,
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("{0} labels exceed the brute-force limit")]
    TooManyLabels(usize),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Probability mass over `{0,1}^m`; vectors outside the support have mass 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution<T> {
    m: usize,
    support: Vec<(Vec<u8>, T)>,
}

/// JSON form of one support point: `{"y": [0, 1, ...], "p": 0.25}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportPoint {
    pub y: Vec<u8>,
    pub p: f64,
}

impl<T: Scalar> ConditionalDistribution<T> {
    pub fn new(support: Vec<(Vec<u8>, T)>) -> Result<Self, BayesError> {
        let m = support.first().ok_or(BayesError::EmptySupport)?.0.len();
        if m == 0 {
            return Err(BayesError::LengthMismatch { expected: 1, found: 0 });
        }
        let mut total = T::zero();
        for (i, (y, p)) in support.iter().enumerate() {
            if y.len() != m {
                return Err(BayesError::LengthMismatch {
                    expected: m,
                    found: y.len(),
                });
            }
            if y.iter().any(|&v| v > 1) {
                return Err(BayesError::NonBinary);
            }
            if *p < T::zero() || *p > T::one() {
                return Err(BayesError::InvalidProbability(p.to_f64_lossy()));
            }
            if support[..i].iter().any(|(other, _)| other == y) {
                return Err(BayesError::DuplicateVector(y.clone()));
            }
            total = total + *p;
        }
        if (total - T::one()).abs().to_f64_lossy() > 1e-12 {
            return Err(BayesError::NotNormalized(total.to_f64_lossy()));
        }
        Ok(ConditionalDistribution { m, support })
    }

    /// Point mass on `y`.
    pub fn point_mass(y: Vec<u8>) -> Result<Self, BayesError> {
        Self::new(vec![(y, T::one())])
    }

    pub fn n_labels(&self) -> usize {
        self.m
    }

    pub fn support(&self) -> &[(Vec<u8>, T)] {
        &self.support
    }

    pub fn probability(&self, y: &[u8]) -> T {
        self.support
            .iter()
            .find(|(v, _)| v.as_slice() == y)
            .map_or(T::zero(), |(_, p)| *p)
    }
}

impl ConditionalDistribution<f64> {
    pub fn from_points(points: &[SupportPoint]) -> Result<Self, BayesError> {
        Self::new(points.iter().map(|sp| (sp.y.clone(), sp.p)).collect())
    }
}

/// A probability written either as a number or as an exact fraction
/// such as `"3/12"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probability {
    Number(f64),
    Fraction(String),
}

impl Probability {
    pub fn to_f64(&self) -> Option<f64> {
        match self {
            Probability::Number(p) => Some(*p),
            Probability::Fraction(_) => self.to_ratio().and_then(|r| r.to_f64()),
        }
    }

    /// Exact value of a fraction or of an integral number.
    pub fn to_ratio(&self) -> Option<Ratio<i64>> {
        match self {
            Probability::Number(p) if p.fract() == 0.0 => Some(Ratio::from_integer(*p as i64)),
            Probability::Number(_) => None,
            Probability::Fraction(s) => {
                let (n, d) = s.split_once('/').unwrap_or((s.as_str(), "1"));
                let (n, d): (i64, i64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
                (d != 0).then(|| Ratio::new(n, d))
            }
        }
    }
}

/// JSON document describing a label distribution:
/// `{"labels": [...], "support": [{"y": [0, 1], "p": "1/4"}, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub support: Vec<DocumentPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentPoint {
    pub y: Vec<u8>,
    pub p: Probability,
}

impl DistributionDocument {
    /// The exact distribution, when every probability is a fraction or an
    /// integer.
    pub fn exact(&self) -> Option<Result<ConditionalDistribution<Ratio<i64>>, BayesError>> {
        let support: Option<Vec<_>> = self
            .support
            .iter()
            .map(|sp| Some((sp.y.clone(), sp.p.to_ratio()?)))
            .collect();
        support.map(ConditionalDistribution::new)
    }

    pub fn float(&self) -> Result<ConditionalDistribution<f64>, BayesError> {
        let support = self
            .support
            .iter()
            .map(|sp| {
                sp.p.to_f64()
                    .map(|p| (sp.y.clone(), p))
                    .ok_or(BayesError::InvalidProbability(f64::NAN))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ConditionalDistribution::new(support)
    }
}

fn row(y: &[u8]) -> Array2<u8> {
    Array2::from_shape_vec((1, y.len()), y.to_vec()).expect("1 x m shape")
}

/// `sum_y P(y) * L(y, yhat)`.
pub fn expected_loss<T: Scalar>(
    dist: &ConditionalDistribution<T>,
    yhat: &[u8],
    kind: LossKind,
) -> Result<T, BayesError> {
    if yhat.len() != dist.m {
        return Err(BayesError::LengthMismatch {
            expected: dist.m,
            found: yhat.len(),
        });
    }
    let pred = row(yhat);
    dist.support.iter().try_fold(T::zero(), |acc, (y, p)| {
        Ok(acc + *p * compute_loss::<T>(kind, &row(y), &pred)?)
    })
}

/// The `j`-th label vector in lexicographic order (first label most
/// significant).
fn lexicographic_vector(index: u64, m: usize) -> Vec<u8> {
    (0..m).map(|j| ((index >> (m - 1 - j)) & 1) as u8).collect()
}

/// Brute-force minimizer of the expected loss over all `2^m` vectors; among
/// equal-risk minimizers the lexicographically smallest wins.
pub fn bayes_optimal<T: Scalar>(dist: &ConditionalDistribution<T>, kind: LossKind) -> Result<(Vec<u8>, T), BayesError> {
    if dist.m > MAX_BRUTE_FORCE_LABELS {
        return Err(BayesError::TooManyLabels(dist.m));
    }
    let mut best: Option<(Vec<u8>, T)> = None;
    for index in 0..(1u64 << dist.m) {
        let candidate = lexicographic_vector(index, dist.m);
        let risk = expected_loss(dist, &candidate, kind)?;
        let better = match &best {
            None => true,
            Some((_, b)) => risk < *b - T::tie_tolerance(),
        };
        if better {
            best = Some((candidate, risk));
        }
    }
    Ok(best.expect("at least one candidate vector"))
}

/// Per-label probability of relevance.
pub fn marginals<T: Scalar>(dist: &ConditionalDistribution<T>) -> Vec<T> {
    (0..dist.m)
        .map(|j| {
            dist.support
                .iter()
                .filter(|(y, _)| y[j] == 1)
                .fold(T::zero(), |acc, (_, p)| acc + *p)
        })
        .collect()
}

/// Whether the joint mass factorizes into the product of its marginals,
/// up to `tol`, on every one of the `2^m` vectors.
pub fn is_independent<T: Scalar>(dist: &ConditionalDistribution<T>, tol: T) -> Result<bool, BayesError> {
    if dist.m > MAX_BRUTE_FORCE_LABELS {
        return Err(BayesError::TooManyLabels(dist.m));
    }
    let marg = marginals(dist);
    for index in 0..(1u64 << dist.m) {
        let y = lexicographic_vector(index, dist.m);
        let product = y
            .iter()
            .zip(&marg)
            .fold(T::one(), |acc, (&v, &q)| acc * if v == 1 { q } else { T::one() - q });
        if (dist.probability(&y) - product).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Hamming-optimal prediction from marginals: relevant iff the marginal
/// exceeds 1/2 (exact halves go to 0).
pub fn threshold_marginals<T: Scalar>(marg: &[T]) -> Vec<u8> {
    let half = T::ratio(1, 2);
    marg.iter().map(|&q| u8::from(q > half + T::tie_tolerance())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn table<T: Scalar>() -> ConditionalDistribution<T> {
        ConditionalDistribution::new(vec![
            (vec![0, 0, 0, 0], T::ratio(3, 12)),
            (vec![0, 1, 1, 1], T::ratio(1, 12)),
            (vec![1, 0, 1, 1], T::ratio(2, 12)),
            (vec![1, 1, 0, 1], T::ratio(2, 12)),
            (vec![1, 1, 1, 0], T::ratio(2, 12)),
            (vec![1, 1, 1, 1], T::ratio(2, 12)),
        ])
        .unwrap()
    }

    #[test]
    fn worked_example_expected_losses() {
        let d = table::<Rational64>();
        assert_eq!(
            expected_loss(&d, &[0, 0, 0, 0], LossKind::SubsetZeroOne).unwrap(),
            Rational64::new(3, 4)
        );
        assert_eq!(
            expected_loss(&d, &[1, 1, 1, 1], LossKind::Hamming).unwrap(),
            Rational64::new(19, 48)
        );
        let f = expected_loss(&table::<f64>(), &[1, 1, 1, 1], LossKind::Hamming).unwrap();
        assert!((f - 19.0 / 48.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example_optima_and_marginals() {
        let d = table::<Rational64>();
        assert_eq!(bayes_optimal(&d, LossKind::SubsetZeroOne).unwrap().0, vec![0, 0, 0, 0]);
        assert_eq!(bayes_optimal(&d, LossKind::Hamming).unwrap().0, vec![1, 1, 1, 1]);
        let q = |n| Rational64::new(n, 12);
        assert_eq!(marginals(&d), vec![q(8), q(7), q(7), q(7)]);
        assert!(!is_independent(&table::<f64>(), 1e-6).unwrap());
    }

    #[test]
    fn point_masses() {
        let d = ConditionalDistribution::<f64>::point_mass(vec![1, 0]).unwrap();
        for kind in LossKind::CANONICAL {
            assert_eq!(bayes_optimal(&d, kind).unwrap().0, vec![1, 0]);
            assert_eq!(expected_loss(&d, &[1, 0], kind).unwrap(), 0.0);
        }
        let d = ConditionalDistribution::<f64>::point_mass(vec![1, 1, 0]).unwrap();
        assert_eq!(marginals(&d), vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn uniform_pair_marginals() {
        let d = ConditionalDistribution::new(vec![(vec![0, 0], 0.5), (vec![1, 1], 0.5)]).unwrap();
        assert_eq!(marginals(&d), vec![0.5, 0.5]);
    }

    #[test]
    fn independence_checks() {
        let mut support = Vec::new();
        for idx in 0..8u64 {
            let y = lexicographic_vector(idx, 3);
            let p = y.iter().fold(1.0, |acc, &v| acc * if v == 1 { 0.3 } else { 0.7 });
            support.push((y, p));
        }
        let d = ConditionalDistribution::new(support).unwrap();
        assert!(is_independent(&d, 1e-12).unwrap());
        let single = ConditionalDistribution::new(vec![(vec![0], 0.2), (vec![1], 0.8)]).unwrap();
        assert!(is_independent(&single, 1e-12).unwrap());
        let r = |n, d| num_rational::Ratio::<i64>::new(n, d);
        let exact = ConditionalDistribution::new(vec![(vec![0], r(1, 5)), (vec![1], r(4, 5))]).unwrap();
        assert!(is_independent(&exact, r(0, 1)).unwrap());
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            ConditionalDistribution::new(vec![(vec![0], 0.5), (vec![0], 0.5)]),
            Err(BayesError::DuplicateVector(_))
        ));
        assert!(matches!(
            ConditionalDistribution::new(vec![(vec![0], 0.5)]),
            Err(BayesError::NotNormalized(_))
        ));
        let d = ConditionalDistribution::<f64>::point_mass(vec![1, 0]).unwrap();
        assert!(matches!(
            expected_loss(&d, &[1], LossKind::Hamming),
            Err(BayesError::LengthMismatch { .. })
        ));
        let big = ConditionalDistribution::<f64>::point_mass(vec![0; 21]).unwrap();
        assert_eq!(
            bayes_optimal(&big, LossKind::Hamming),
            Err(BayesError::TooManyLabels(21))
        );
    }

    #[test]
    fn subset_risk_is_one_minus_mass() {
        let d = table::<Rational64>();
        for idx in 0..16 {
            let y = lexicographic_vector(idx, 4);
            let risk = expected_loss(&d, &y, LossKind::SubsetZeroOne).unwrap();
            assert_eq!(risk, Rational64::from_integer(1) - d.probability(&y));
        }
    }

    #[test]
    fn optimum_ignores_support_order() {
        let d = table::<Rational64>();
        let mut rev = d.support().to_vec();
        rev.reverse();
        let r = ConditionalDistribution::new(rev).unwrap();
        for kind in LossKind::CANONICAL {
            assert_eq!(bayes_optimal(&d, kind).unwrap(), bayes_optimal(&r, kind).unwrap());
        }
    }
}
