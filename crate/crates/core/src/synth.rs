//! Seeded synthetic multi-label datasets.

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid size: {0}")]
    InvalidSize(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Blobs,
    XorDependence,
    CopyLabel,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Blobs => "blobs",
            SynthKind::XorDependence => "xor-dependence",
            SynthKind::CopyLabel => "copy-label",
        }
    }

    pub fn from_name(name: &str) -> Option<SynthKind> {
        [SynthKind::Blobs, SynthKind::XorDependence, SynthKind::CopyLabel]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

pub fn generate(kind: SynthKind, s: usize, d: usize, m: usize, seed: u64) -> Result<Dataset, SynthError> {
    match kind {
        SynthKind::Blobs => blobs(s, d, m, seed),
        SynthKind::XorDependence => xor_dependence(s, d, m, seed),
        SynthKind::CopyLabel => copy_label(s, d, m, seed),
    }
}

fn check(s: usize, d: usize, m: usize, min_d: usize, min_m: usize) -> Result<(), SynthError> {
    if s == 0 || d < min_d || m < min_m {
        return Err(SynthError::InvalidSize(format!(
            "need S >= 1, d >= {min_d}, m >= {min_m}; got S={s}, d={d}, m={m}"
        )));
    }
    Ok(())
}

fn dataset(x: Array2<f64>, y: Array2<u8>) -> Dataset {
    Dataset::new(x, y).expect("generated shapes agree")
}

/// Points around `k` centers drawn uniformly from `[-10, 10]^d`, with
/// isotropic Gaussian noise of standard deviation `spread`. Returns the
/// features and the cluster of each row.
pub fn gaussian_clusters(
    s: usize,
    d: usize,
    k: usize,
    spread: f64,
    seed: u64,
) -> Result<(Array2<f64>, Vec<usize>), SynthError> {
    check(s, d, k, 1, 1)?;
    let mut rng = rng_from_seed(seed);
    let centers = Array2::from_shape_simple_fn((k, d), || rng.random_range(-10.0..10.0));
    let noise = Normal::new(0.0, spread.max(0.0)).map_err(|e| SynthError::InvalidSize(e.to_string()))?;
    let clusters: Vec<usize> = (0..s).map(|i| i % k).collect();
    let x = Array2::from_shape_fn((s, d), |(i, j)| centers[[clusters[i], j]] + noise.sample(&mut rng));
    Ok((x, clusters))
}

/// Gaussian clusters (`max(m + 1, 3)` of them, unit spread) where every
/// cluster carries a fixed random label vector whose bits are set
/// independently with probability 0.35.
pub fn blobs(s: usize, d: usize, m: usize, seed: u64) -> Result<Dataset, SynthError> {
    check(s, d, m, 1, 1)?;
    let k = (m + 1).max(3);
    let (x, clusters) = gaussian_clusters(s, d, k, 1.0, derive_seed(seed, 0))?;
    let mut rng = rng_from_seed(derive_seed(seed, 1));
    let sets = Array2::from_shape_simple_fn((k, m), || rng.random_bool(0.35) as u8);
    Ok(dataset(x, sets.select(Axis(0), &clusters)))
}

/// Features uniform on `[-1, 1]^d`. Label 0 is the linear rule
/// `x0 + 0.5 x1 > 0`, label 1 is `(x0 > 0) xor (x1 > 0)`, and label `j >= 2`
/// is `x_(j mod d) > 0`.
pub fn xor_dependence(s: usize, d: usize, m: usize, seed: u64) -> Result<Dataset, SynthError> {
    check(s, d, m, 2, 2)?;
    let mut rng = rng_from_seed(seed);
    let x = Array2::from_shape_simple_fn((s, d), || rng.random_range(-1.0..=1.0));
    let y = Array2::from_shape_fn((s, m), |(i, j)| {
        let r = x.row(i);
        (match j {
            0 => r[0] + 0.5 * r[1] > 0.0,
            1 => (r[0] > 0.0) != (r[1] > 0.0),
            _ => r[j % d] > 0.0,
        }) as u8
    });
    Ok(dataset(x, y))
}

/// Standard normal features. Label 0 thresholds a random linear score plus
/// Gaussian noise (sd 0.5), label 1 equals label 0, and label `j >= 2` is
/// `x_(j mod d) > 0`.
pub fn copy_label(s: usize, d: usize, m: usize, seed: u64) -> Result<Dataset, SynthError> {
    check(s, d, m, 1, 2)?;
    let mut rng = rng_from_seed(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let x = Array2::from_shape_simple_fn((s, d), || std.sample(&mut rng));
    let w: Vec<f64> = (0..d).map(|_| std.sample(&mut rng)).collect();
    let first: Vec<u8> = (0..s)
        .map(|i| {
            let score: f64 = x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum();
            (score + 0.5 * std.sample(&mut rng) > 0.0) as u8
        })
        .collect();
    let y = Array2::from_shape_fn((s, m), |(i, j)| match j {
        0 | 1 => first[i],
        _ => (x[[i, j % d]] > 0.0) as u8,
    });
    Ok(dataset(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        for kind in [SynthKind::Blobs, SynthKind::XorDependence, SynthKind::CopyLabel] {
            let a = generate(kind, 50, 3, 3, 11).unwrap();
            let b = generate(kind, 50, 3, 3, 11).unwrap();
            let c = generate(kind, 50, 3, 3, 12).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.features, c.features);
            assert_eq!((a.n_rows(), a.n_features(), a.n_labels()), (50, 3, 3));
        }
    }

    #[test]
    fn copy_label_columns_match() {
        let ds = copy_label(200, 4, 3, 5).unwrap();
        assert_eq!(ds.labels.column(0), ds.labels.column(1));
    }

    #[test]
    fn xor_label_follows_feature_signs() {
        let ds = xor_dependence(100, 2, 2, 1).unwrap();
        for (r, y) in ds.features.rows().into_iter().zip(ds.labels.rows()) {
            assert_eq!(y[1] == 1, (r[0] > 0.0) ^ (r[1] > 0.0));
        }
    }

    #[test]
    fn sizes_are_validated() {
        assert!(blobs(0, 2, 2, 0).is_err());
        assert!(xor_dependence(10, 1, 2, 0).is_err());
        assert!(copy_label(10, 2, 1, 0).is_err());
        assert_eq!(SynthKind::from_name("copy-label"), Some(SynthKind::CopyLabel));
    }
}
