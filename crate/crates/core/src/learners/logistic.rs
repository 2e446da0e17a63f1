//! L2-regularized logistic regression trained by full-batch gradient descent
//! on internally standardized features. More than two classes are handled
//! one-vs-rest with normalized scores.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::LearnError;
use crate::deadline::Deadline;

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss plus `l2/2 * |w|^2` (bias unpenalized), with its gradient.
///
/// Returns `(loss, grad_w, grad_b)`.
pub fn objective(
    x: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    w: ArrayView1<f64>,
    b: f64,
    l2: f64,
) -> (f64, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let z = x.dot(&w) + b;
    let loss = z
        .iter()
        .zip(targets.iter())
        .map(|(&zi, &ti)| softplus(zi) - ti * zi)
        .sum::<f64>()
        / n
        + 0.5 * l2 * w.dot(&w);
    let residual: Array1<f64> = z
        .iter()
        .zip(targets.iter())
        .map(|(&zi, &ti)| sigmoid(zi) - ti)
        .collect();
    let grad_w = x.t().dot(&residual) / n + &w * l2;
    let grad_b = residual.sum() / n;
    (loss, grad_w, grad_b)
}

#[derive(Debug, Clone)]
struct Binary {
    w: Array1<f64>,
    b: f64,
}

impl Binary {
    fn fit(
        x: ArrayView2<f64>,
        targets: ArrayView1<f64>,
        learning_rate: f64,
        iterations: usize,
        l2: f64,
        deadline: &Deadline,
    ) -> Result<Binary, LearnError> {
        let mut w = Array1::<f64>::zeros(x.ncols());
        let mut b = 0.0;
        for _ in 0..iterations {
            deadline.check()?;
            let (loss, gw, gb) = objective(x, targets, w.view(), b, l2);
            if !loss.is_finite() {
                return Err(LearnError::NumericalFailure("non-finite logistic loss".into()));
            }
            w.scaled_add(-learning_rate, &gw);
            b -= learning_rate * gb;
        }
        Ok(Binary { w, b })
    }

    fn probability(&self, x: ArrayView2<f64>) -> Array1<f64> {
        (x.dot(&self.w) + self.b).mapv(sigmoid)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LogisticModel {
    means: Array1<f64>,
    scales: Array1<f64>,
    /// One model for two classes (positive = second class), else one per class.
    models: Vec<Binary>,
}

/// Column means and standard deviations; zero-spread columns keep scale 1.
pub(crate) fn standardization(x: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let scales = x.var_axis(Axis(0), 0.0).mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    (means, scales)
}

impl LogisticModel {
    pub(crate) fn fit(
        x: ArrayView2<f64>,
        y: &[usize],
        n_classes: usize,
        learning_rate: f64,
        iterations: usize,
        l2: f64,
        deadline: &Deadline,
    ) -> Result<Self, LearnError> {
        let (means, scales) = standardization(x);
        let z = (&x - &means) / &scales;
        let targets_for =
            |class: usize| -> Array1<f64> { y.iter().map(|&c| if c == class { 1.0 } else { 0.0 }).collect() };
        let positives: Vec<usize> = if n_classes == 2 {
            vec![1]
        } else {
            (0..n_classes).collect()
        };
        let models = positives
            .into_iter()
            .map(|c| Binary::fit(z.view(), targets_for(c).view(), learning_rate, iterations, l2, deadline))
            .collect::<Result<_, _>>()?;
        Ok(LogisticModel { means, scales, models })
    }

    pub(crate) fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let z = (&x - &self.means) / &self.scales;
        if self.models.len() == 1 {
            let p = self.models[0].probability(z.view());
            let mut out = Array2::zeros((x.nrows(), 2));
            for (i, &pi) in p.iter().enumerate() {
                out[[i, 0]] = 1.0 - pi;
                out[[i, 1]] = pi;
            }
            return out;
        }
        let k = self.models.len();
        let mut out = Array2::zeros((x.nrows(), k));
        for (c, m) in self.models.iter().enumerate() {
            out.column_mut(c).assign(&m.probability(z.view()));
        }
        for mut row in out.rows_mut() {
            let s = row.sum();
            if s > 0.0 {
                row /= s;
            } else {
                row.fill(1.0 / k as f64);
            }
        }
        out
    }
}
