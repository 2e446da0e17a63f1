//! k-nearest-neighbour vote.

use ndarray::{Array2, ArrayView2};

use super::LearnError;
use crate::deadline::Deadline;

#[derive(Debug, Clone)]
pub(crate) struct KnnModel {
    x: Array2<f64>,
    y: Vec<usize>,
    n_classes: usize,
    k: usize,
    manhattan: bool,
}

impl KnnModel {
    pub(crate) fn fit(x: ArrayView2<f64>, y: &[usize], n_classes: usize, k: usize, manhattan: bool) -> Self {
        KnnModel {
            x: x.to_owned(),
            y: y.to_vec(),
            n_classes,
            k: k.clamp(1, y.len()),
            manhattan,
        }
    }

    /// Scores are vote fractions among the `k` nearest training rows;
    /// distance ties resolve toward the earlier training row.
    pub(crate) fn predict(&self, q: ArrayView2<f64>, deadline: &Deadline) -> Result<Array2<f64>, LearnError> {
        let mut out = Array2::zeros((q.nrows(), self.n_classes));
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(self.y.len());
        for (i, row) in q.rows().into_iter().enumerate() {
            if i % 64 == 0 {
                deadline.check()?;
            }
            dist.clear();
            for (j, train) in self.x.rows().into_iter().enumerate() {
                let d = if self.manhattan {
                    row.iter().zip(train.iter()).map(|(a, b)| (a - b).abs()).sum()
                } else {
                    row.iter().zip(train.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                };
                dist.push((d, j));
            }
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if self.k < dist.len() {
                dist.select_nth_unstable_by(self.k - 1, cmp);
            }
            for &(_, j) in &dist[..self.k] {
                out[[i, self.y[j]]] += 1.0;
            }
            out.row_mut(i).mapv_inplace(|votes| votes / self.k as f64);
        }
        Ok(out)
    }
}
