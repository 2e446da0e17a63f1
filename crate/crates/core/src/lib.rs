//! Multi-label AutoML engine.
//!
//! The configuration space of recursively composed multi-label classifiers
//! and preprocessor chains is a hierarchical task network
//! ([`searchspace`]); [`optimize`] searches it with best-first search guided
//! by random-completion rollouts, random search, successive halving or
//! Hyperband. Candidates are scored by [`eval`] with the exact multi-label
//! losses of [`losses`]. [`bayes`] provides a brute-force Bayes-optimal oracle
//! over explicit label distributions.

pub mod bayes;
pub mod data;
pub mod deadline;
pub mod eval;
pub mod learners;
pub mod losses;
pub mod mlc;
pub mod optimize;
pub mod params;
pub mod scalar;
pub mod searchspace;
pub mod seed;
pub mod synth;

pub use data::{Dataset, LabelPosition};
pub use losses::LossKind;
pub use scalar::{Real, Scalar};

/// Exact rational arithmetic for loss and risk computations.
pub type Rational = num_rational::Ratio<i64>;
/// Label distribution with double-precision probabilities.
pub type Distribution = bayes::ConditionalDistribution<f64>;
/// Label distribution with exact rational probabilities.
pub type ExactDistribution = bayes::ConditionalDistribution<Rational>;
