//! Gaussian naive Bayes: per-class, per-feature normal likelihoods with a
//! variance floor, evaluated in log space.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::row_slice;
use crate::error::{IflError, Result};

use super::tree::argmax;

const VAR_FLOOR: f64 = 1e-9;
const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Class frequencies.
    priors: Vec<f64>,
    /// m x h per-class feature means.
    means: Array2<f64>,
    /// m x h per-class population variances, floored at 1e-9.
    vars: Array2<f64>,
    n_classes: usize,
    n_features: usize,
}

pub fn fit_gaussian_nb(x: &Array2<f64>, y: &[usize], n_classes: usize) -> Result<GaussianNb> {
    let n = x.nrows();
    let h = x.ncols();
    if n == 0 || h == 0 {
        return Err(IflError::invalid_parameter(
            "naive Bayes needs at least one sample and one feature",
        ));
    }
    if y.len() != n {
        return Err(IflError::invalid_parameter(
            "one label per sample is required",
        ));
    }
    if n_classes < 2 {
        return Err(IflError::invalid_parameter("n_classes must be >= 2"));
    }
    if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(IflError::invalid_parameter(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }

    let mut counts = vec![0usize; n_classes];
    let mut means = Array2::zeros((n_classes, h));
    for (i, &c) in y.iter().enumerate() {
        counts[c] += 1;
        for (j, v) in row_slice(x, i).iter().enumerate() {
            means[[c, j]] += v;
        }
    }
    for c in 0..n_classes {
        if counts[c] > 0 {
            for j in 0..h {
                means[[c, j]] /= counts[c] as f64;
            }
        }
    }
    let mut vars = Array2::zeros((n_classes, h));
    for (i, &c) in y.iter().enumerate() {
        for (j, v) in row_slice(x, i).iter().enumerate() {
            let d = v - means[[c, j]];
            vars[[c, j]] += d * d;
        }
    }
    let mut floored = false;
    for c in 0..n_classes {
        for j in 0..h {
            if counts[c] > 0 {
                vars[[c, j]] /= counts[c] as f64;
            }
            if vars[[c, j]] < VAR_FLOOR {
                if counts[c] > 0 {
                    floored = true;
                }
                vars[[c, j]] = VAR_FLOOR;
            }
        }
    }
    if floored {
        log::warn!(
            "naive Bayes: near-zero variance floored at {VAR_FLOOR}; \
             a feature is (almost) constant within a class"
        );
    }

    let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(GaussianNb {
        priors,
        means,
        vars,
        n_classes,
        n_features: h,
    })
}

impl GaussianNb {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Unnormalized log posterior per class. Classes with zero prior get
    /// `-inf` and can never win the argmax.
    fn log_posterior(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(IflError::invalid_parameter(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let mut out = Vec::with_capacity(self.n_classes);
        for c in 0..self.n_classes {
            if self.priors[c] <= 0.0 {
                out.push(f64::NEG_INFINITY);
                continue;
            }
            let mut lp = self.priors[c].ln();
            for (j, v) in row.iter().enumerate() {
                let var = self.vars[[c, j]];
                let d = v - self.means[[c, j]];
                lp += -0.5 * (LN_2PI + var.ln()) - d * d / (2.0 * var);
            }
            out.push(lp);
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        (0..x.nrows())
            .map(|i| Ok(argmax(&self.log_posterior(row_slice(x, i))?)))
            .collect()
    }

    /// Softmax of the log posteriors.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.n_classes));
        for i in 0..x.nrows() {
            let lp = self.log_posterior(row_slice(x, i))?;
            let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            let mut exps = vec![0.0; self.n_classes];
            for (c, l) in lp.iter().enumerate() {
                let e = (l - max).exp();
                exps[c] = e;
                total += e;
            }
            for (c, e) in exps.iter().enumerate() {
                out[[i, c]] = e / total;
            }
        }
        Ok(out)
    }
}
