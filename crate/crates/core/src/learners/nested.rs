//! Nested dichotomies: a random binary tree over the class set with a binary
//! classifier at every internal node, and ensembles of such trees.
//!
//! A class's probability is the product of the branch probabilities on the
//! path from the root to its leaf.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::Serialize;

use super::{class_probability, fit_learner_until, LearnError, LearnerSpec, Model};
use crate::deadline::Deadline;
use crate::seed::{derive_seed, rng_from_seed, Rng};

/// Unfitted dichotomy structure. At every split, the side holding the
/// smallest class is `left`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum NdTree {
    Leaf(usize),
    Split { left: Box<NdTree>, right: Box<NdTree> },
}

impl NdTree {
    /// Classes under this node, in left-to-right leaf order.
    pub fn classes(&self) -> Vec<usize> {
        match self {
            NdTree::Leaf(c) => vec![*c],
            NdTree::Split { left, right } => {
                let mut v = left.classes();
                v.extend(right.classes());
                v
            }
        }
    }

    /// The root's two class sets, each sorted.
    pub fn root_bipartition(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match self {
            NdTree::Leaf(_) => None,
            NdTree::Split { left, right } => {
                let (mut l, mut r) = (left.classes(), right.classes());
                l.sort_unstable();
                r.sort_unstable();
                Some((l, r))
            }
        }
    }
}

/// Samples a random nested dichotomy: at each node every class picks a side
/// by a fair coin, redrawing assignments that leave a side empty.
pub fn sample_dichotomy(classes: &[usize], seed: u64) -> Result<NdTree, LearnError> {
    let mut set = classes.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.len() < 2 {
        return Err(LearnError::TooFewClasses(set.len()));
    }
    Ok(sample_node(&set, &mut rng_from_seed(seed)))
}

fn sample_node(set: &[usize], rng: &mut Rng) -> NdTree {
    if set.len() == 1 {
        return NdTree::Leaf(set[0]);
    }
    let (left, right) = loop {
        let (a, b): (Vec<usize>, Vec<usize>) = set.iter().partition(|_| rng.random::<bool>());
        if !a.is_empty() && !b.is_empty() {
            break if a[0] < b[0] { (a, b) } else { (b, a) };
        }
    };
    let left = Box::new(sample_node(&left, rng));
    let right = Box::new(sample_node(&right, rng));
    NdTree::Split { left, right }
}

#[derive(Debug, Clone)]
enum FittedNode {
    Leaf(usize),
    Split {
        /// Binary model; class 1 means "right side".
        model: Box<Model>,
        left: Box<FittedNode>,
        right: Box<FittedNode>,
    },
}

fn fit_node(
    node: &NdTree,
    inner: &LearnerSpec,
    x: ArrayView2<f64>,
    y: &[usize],
    seed: u64,
    counter: &mut u64,
    deadline: &Deadline,
) -> Result<FittedNode, LearnError> {
    match node {
        NdTree::Leaf(c) => Ok(FittedNode::Leaf(*c)),
        NdTree::Split { left, right } => {
            let left_set = left.classes();
            let right_set = right.classes();
            let rows: Vec<usize> = (0..y.len())
                .filter(|&i| left_set.contains(&y[i]) || right_set.contains(&y[i]))
                .collect();
            let sub_y: Vec<usize> = rows.iter().map(|&i| usize::from(right_set.contains(&y[i]))).collect();
            let sub_x = x.select(Axis(0), &rows);
            let node_seed = derive_seed(seed, *counter);
            *counter += 1;
            let model = fit_learner_until(inner, sub_x.view(), &sub_y, node_seed, deadline)?;
            Ok(FittedNode::Split {
                model: Box::new(model),
                left: Box::new(fit_node(left, inner, x, y, seed, counter, deadline)?),
                right: Box::new(fit_node(right, inner, x, y, seed, counter, deadline)?),
            })
        }
    }
}

fn accumulate(
    node: &FittedNode,
    x: ArrayView2<f64>,
    path: &[f64],
    out: &mut Array2<f64>,
    weight: f64,
    deadline: &Deadline,
) -> Result<(), LearnError> {
    match node {
        FittedNode::Leaf(c) => {
            for (i, p) in path.iter().enumerate() {
                out[[i, *c]] += weight * p;
            }
            Ok(())
        }
        FittedNode::Split { model, left, right } => {
            let p_right = class_probability(model, x, 1, deadline)?;
            let to_left: Vec<f64> = path.iter().zip(&p_right).map(|(a, r)| a * (1.0 - r)).collect();
            let to_right: Vec<f64> = path.iter().zip(&p_right).map(|(a, r)| a * r).collect();
            accumulate(left, x, &to_left, out, weight, deadline)?;
            accumulate(right, x, &to_right, out, weight, deadline)
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct NdEnsembleModel {
    members: Vec<FittedNode>,
    n_classes: usize,
}

impl NdEnsembleModel {
    pub(crate) fn fit(
        inner: &LearnerSpec,
        x: ArrayView2<f64>,
        y: &[usize],
        n_classes: usize,
        ensemble_size: usize,
        seed: u64,
        deadline: &Deadline,
    ) -> Result<Self, LearnError> {
        let classes: Vec<usize> = (0..n_classes).collect();
        let members = (0..ensemble_size as u64)
            .map(|t| {
                let member_seed = derive_seed(seed, t);
                let tree = sample_dichotomy(&classes, member_seed)?;
                fit_node(&tree, inner, x, y, member_seed, &mut 0, deadline)
            })
            .collect::<Result<_, _>>()?;
        Ok(NdEnsembleModel { members, n_classes })
    }

    pub(crate) fn predict(&self, x: ArrayView2<f64>, deadline: &Deadline) -> Result<Array2<f64>, LearnError> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        let start = vec![1.0; x.nrows()];
        let weight = 1.0 / self.members.len() as f64;
        for member in &self.members {
            accumulate(member, x, &start, &mut out, weight, deadline)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit_learner, predict_scores, LearnerKind};
    use ndarray::array;
    use std::collections::BTreeMap;

    #[test]
    fn two_classes_have_one_dichotomy() {
        for seed in 0..20 {
            let t = sample_dichotomy(&[3, 7], seed).unwrap();
            assert_eq!(
                t,
                NdTree::Split {
                    left: Box::new(NdTree::Leaf(3)),
                    right: Box::new(NdTree::Leaf(7))
                }
            );
        }
        assert_eq!(sample_dichotomy(&[1], 0), Err(LearnError::TooFewClasses(1)));
    }

    #[test]
    fn three_classes_shapes_and_determinism() {
        let mut shapes = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let t = sample_dichotomy(&[0, 1, 2], seed).unwrap();
            assert_eq!(t, sample_dichotomy(&[0, 1, 2], seed).unwrap());
            shapes.insert(format!("{t:?}"));
        }
        assert_eq!(shapes.len(), 3);
    }

    #[test]
    fn four_class_root_bipartitions_are_uniform() {
        let mut freq: BTreeMap<(Vec<usize>, Vec<usize>), usize> = BTreeMap::new();
        for seed in 0..10_000 {
            let t = sample_dichotomy(&[0, 1, 2, 3], seed).unwrap();
            *freq.entry(t.root_bipartition().unwrap()).or_default() += 1;
        }
        // 4 splits of sizes {1,3} and 3 of sizes {2,2}, each with mass 1/7.
        assert_eq!(freq.len(), 7);
        let sizes: std::collections::BTreeSet<usize> = freq.keys().map(|(l, r)| l.len().min(r.len())).collect();
        assert_eq!(sizes, [1, 2].into_iter().collect());
        for count in freq.values() {
            assert!((*count as f64 / 10_000.0 - 1.0 / 7.0).abs() < 0.02, "{count}");
        }
    }

    #[test]
    fn binary_problem_matches_inner_learner() {
        let x = array![[0.0, 1.0], [1.0, 0.5], [2.0, 2.0], [3.0, 0.0], [4.0, 1.5], [5.0, 1.0]];
        let y = [0, 0, 1, 0, 1, 1];
        let inner = LearnerSpec::new(LearnerKind::Tree).with("max_depth", 2i64);
        let direct = predict_scores(&fit_learner(&inner, x.view(), &y, 0).unwrap(), x.view()).unwrap();
        for size in [1i64, 3] {
            let nd = LearnerSpec::new(LearnerKind::NdEnsemble)
                .with("ensemble_size", size)
                .with_nested(inner.clone());
            let s = predict_scores(&fit_learner(&nd, x.view(), &y, 9).unwrap(), x.view()).unwrap();
            for (a, b) in s.iter().zip(direct.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_tree_scores_sum_to_one() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0], [6.0], [7.0]];
        let y = [0, 0, 1, 1, 2, 2, 3, 3];
        let nd = LearnerSpec::new(LearnerKind::NdEnsemble)
            .with("ensemble_size", 1i64)
            .with_nested(LearnerSpec::new(LearnerKind::GaussianNb));
        for seed in 0..5 {
            let m = fit_learner(&nd, x.view(), &y, seed).unwrap();
            let s = predict_scores(&m, x.view()).unwrap();
            for row in s.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-9);
            }
            let again = predict_scores(&fit_learner(&nd, x.view(), &y, seed).unwrap(), x.view()).unwrap();
            assert_eq!(s, again);
        }
    }
}
