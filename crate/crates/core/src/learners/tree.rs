//! CART classification tree with Gini impurity.

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::LearnError;
use crate::deadline::Deadline;

#[derive(Debug, Clone)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct TreeModel {
    root: Node,
    n_classes: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    deadline: &'a Deadline,
}

struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        counts
    }

    fn leaf(&self, counts: &[usize], n: usize) -> Node {
        Node::Leaf(counts.iter().map(|&c| c as f64 / n as f64).collect())
    }

    /// Lowest weighted child impurity over all features and midpoint
    /// thresholds; ties keep the earliest feature and smallest threshold.
    fn best_split(&self, rows: &[usize], total: &[usize]) -> Option<Candidate> {
        let n = rows.len();
        let mut best: Option<Candidate> = None;
        let mut order = rows.to_vec();
        for feature in 0..self.x.ncols() {
            let col = self.x.column(feature);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            for i in 0..n - 1 {
                left[self.y[order[i]]] += 1;
                let n_left = i + 1;
                let (lo, hi) = (col[order[i]], col[order[i + 1]]);
                if lo == hi || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let impurity =
                    (n_left as f64 * gini(&left, n_left) + (n - n_left) as f64 * gini(&right, n - n_left)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate {
                        impurity,
                        feature,
                        threshold,
                    });
                }
            }
        }
        best
    }

    fn build(&self, rows: Vec<usize>, depth: usize) -> Result<Node, LearnError> {
        self.deadline.check()?;
        let counts = self.counts(&rows);
        let n = rows.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || n < 2 * self.min_leaf {
            return Ok(self.leaf(&counts, n));
        }
        let Some(split) = self.best_split(&rows, &counts) else {
            return Ok(self.leaf(&counts, n));
        };
        let col = self.x.column(split.feature);
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| col[i] <= split.threshold);
        Ok(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.build(l, depth + 1)?),
            right: Box::new(self.build(r, depth + 1)?),
        })
    }
}

impl TreeModel {
    pub(crate) fn fit(
        x: ArrayView2<f64>,
        y: &[usize],
        n_classes: usize,
        max_depth: usize,
        min_leaf: usize,
        deadline: &Deadline,
    ) -> Result<Self, LearnError> {
        let builder = Builder {
            x,
            y,
            n_classes,
            max_depth,
            min_leaf: min_leaf.max(1),
            deadline,
        };
        let root = builder.build((0..x.nrows()).collect(), 0)?;
        Ok(TreeModel { root, n_classes })
    }

    fn leaf_for(&self, row: ArrayView1<f64>) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub(crate) fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for (i, row) in x.rows().into_iter().enumerate() {
            for (c, &p) in self.leaf_for(row).iter().enumerate() {
                out[[i, c]] = p;
            }
        }
        out
    }
}
