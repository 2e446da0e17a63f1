//! Gaussian naive Bayes.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::LearnError;

#[derive(Debug, Clone)]
pub(crate) struct NaiveBayesModel {
    log_priors: Vec<f64>,
    means: Array2<f64>,
    variances: Array2<f64>,
}

impl NaiveBayesModel {
    /// Per-class variances are inflated by `var_smoothing` times the largest
    /// feature variance (or by `var_smoothing` alone if every feature is
    /// constant).
    pub(crate) fn fit(
        x: ArrayView2<f64>,
        y: &[usize],
        n_classes: usize,
        var_smoothing: f64,
    ) -> Result<Self, LearnError> {
        let d = x.ncols();
        let max_var = x.var_axis(Axis(0), 0.0).fold(0.0f64, |a, &b| a.max(b));
        let epsilon = if max_var > 0.0 {
            var_smoothing * max_var
        } else {
            var_smoothing
        };
        let mut means = Array2::zeros((n_classes, d));
        let mut variances = Array2::zeros((n_classes, d));
        let mut log_priors = Vec::with_capacity(n_classes);
        for c in 0..n_classes {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
            let xc = x.select(Axis(0), &rows);
            means.row_mut(c).assign(&xc.mean_axis(Axis(0)).expect("class has rows"));
            variances.row_mut(c).assign(&(xc.var_axis(Axis(0), 0.0) + epsilon));
            log_priors.push((rows.len() as f64 / y.len() as f64).ln());
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(LearnError::NumericalFailure("degenerate naive Bayes variance".into()));
        }
        Ok(NaiveBayesModel {
            log_priors,
            means,
            variances,
        })
    }

    pub(crate) fn predict(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let k = self.log_priors.len();
        let mut out = Array2::zeros((x.nrows(), k));
        for (i, row) in x.rows().into_iter().enumerate() {
            let joint: Array1<f64> = (0..k)
                .map(|c| {
                    let mean = self.means.row(c);
                    let var = self.variances.row(c);
                    self.log_priors[c]
                        - 0.5
                            * row
                                .iter()
                                .zip(mean.iter().zip(var.iter()))
                                .map(|(&v, (&mu, &s2))| (2.0 * std::f64::consts::PI * s2).ln() + (v - mu).powi(2) / s2)
                                .sum::<f64>()
                })
                .collect();
            let top = joint.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let exp = joint.mapv(|v| (v - top).exp());
            let total = exp.sum();
            out.row_mut(i).assign(&(exp / total));
        }
        out
    }
}
