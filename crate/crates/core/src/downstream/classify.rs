//! L1-penalized logistic regression, used as the classifier when measuring
//! misclassification before and after removing flagged observations.
//!
//! Proximal Newton: each outer step forms the IRLS quadratic approximation and
//! solves the weighted lasso on it by coordinate descent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lasso::{fold_assignment, log_path, soft_threshold, Standardized};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::glm::{CanonicalFamily, Logistic};

const N_LAMBDA: usize = 30;
const LAMBDA_RATIO: f64 = 1e-2;
const MAX_OUTER: usize = 50;
const OUTER_TOL: f64 = 1e-6;
const INNER_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 5_000;
const MIN_WEIGHT: f64 = 1e-5;
const PROB_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticLassoFit {
    /// Original-scale coefficients.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub lambda_path: Vec<f64>,
    /// Mean held-out binomial deviance per path value.
    pub cv_deviance: Vec<f64>,
}

impl LogisticLassoFit {
    pub fn linear_predictor(&self, data: &DataMatrix, i: usize) -> f64 {
        self.intercept + (0..data.p()).map(|j| self.beta[j] * data.get(i, j)).sum::<f64>()
    }
}

struct Path<'a> {
    st: &'a Standardized,
    y: Vec<f64>,
    b0: f64,
    beta: Vec<f64>,
}

impl<'a> Path<'a> {
    fn new(st: &'a Standardized, y: Vec<f64>) -> Self {
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        let b0 = (ybar / (1.0 - ybar)).ln();
        Self { st, y, b0, beta: vec![0.0; st.p] }
    }

    fn theta(&self) -> Vec<f64> {
        let mut theta = vec![self.b0; self.st.n];
        for (j, &b) in self.beta.iter().enumerate() {
            if b != 0.0 {
                for (t, z) in theta.iter_mut().zip(self.st.col(j)) {
                    *t += b * z;
                }
            }
        }
        theta
    }

    fn solve(&mut self, lambda: f64) -> Result<()> {
        let n = self.st.n as f64;
        for _ in 0..MAX_OUTER {
            let theta = self.theta();
            let mut w = Vec::with_capacity(self.st.n);
            let mut r = Vec::with_capacity(self.st.n);
            for (t, y) in theta.iter().zip(&self.y) {
                let mu = Logistic.mean(*t);
                let wi = Logistic.variance(*t).max(MIN_WEIGHT);
                w.push(wi);
                r.push((y - mu) / wi);
            }
            let xwx: Vec<f64> = (0..self.st.p)
                .map(|j| self.st.col(j).iter().zip(&w).map(|(z, wi)| wi * z * z).sum::<f64>() / n)
                .collect();
            let sum_w: f64 = w.iter().sum();
            let start = (self.b0, self.beta.clone());

            let mut sweeps = 0;
            loop {
                let mut change = 0.0f64;
                let d0 = w.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / sum_w;
                self.b0 += d0;
                r.iter_mut().for_each(|v| *v -= d0);
                change = change.max(d0.abs());
                for j in 0..self.st.p {
                    if self.st.scales[j] == 0.0 || xwx[j] == 0.0 {
                        continue;
                    }
                    let col = self.st.col(j);
                    let old = self.beta[j];
                    let g: f64 = col.iter().zip(&w).zip(&r).map(|((z, wi), ri)| z * wi * ri).sum::<f64>() / n;
                    let new = soft_threshold(g + xwx[j] * old, lambda) / xwx[j];
                    let delta = new - old;
                    if delta != 0.0 {
                        for (ri, z) in r.iter_mut().zip(col) {
                            *ri -= delta * z;
                        }
                        self.beta[j] = new;
                        change = change.max(delta.abs() * xwx[j].sqrt());
                    }
                }
                sweeps += 1;
                if change <= INNER_TOL {
                    break;
                }
                if sweeps >= MAX_SWEEPS {
                    return Err(Error::ConvergenceFailure { iterations: sweeps, max_change: change });
                }
            }
            let moved = self
                .beta
                .iter()
                .zip(&start.1)
                .map(|(a, b)| (a - b).abs())
                .fold((self.b0 - start.0).abs(), f64::max);
            if moved <= OUTER_TOL {
                return Ok(());
            }
        }
        Ok(())
    }
}

fn binomial_deviance(y: f64, theta: f64) -> f64 {
    let mu = Logistic.mean(theta).clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    -2.0 * (y * mu.ln() + (1.0 - y) * (1.0 - mu).ln())
}

/// Cross-validated (binomial deviance) L1 logistic regression over a
/// 30-point log-spaced path down to `1e-2 lambda_max`.
pub fn logistic_lasso_cv(data: &DataMatrix, folds: usize, seed: u64) -> Result<LogisticLassoFit> {
    Logistic.check_response(data.y())?;
    if folds < 2 || folds > data.n() {
        return Err(Error::InvalidArgument(format!("invalid fold count {folds}")));
    }
    let st = Standardized::new(data, None);
    let lambda_max = st.lambda_max();
    let path = log_path(lambda_max, LAMBDA_RATIO, N_LAMBDA);
    let labels = fold_assignment(data.n(), folds, seed);

    let fold_dev: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != f).collect();
            let test: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == f).collect();
            let y_train: Vec<f64> = train.iter().map(|&i| data.y()[i]).collect();
            let mut dev = vec![0.0; path.len()];
            // A fold holding a single class cannot be fit; it contributes the
            // intercept-only deviance at every penalty.
            let ones = y_train.iter().filter(|&&v| v == 1.0).count();
            let st_f = Standardized::new(data, Some(&train));
            if ones == 0 || ones == y_train.len() {
                let ybar = (ones as f64 / y_train.len() as f64).clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                let theta = (ybar / (1.0 - ybar)).ln();
                let d: f64 = test.iter().map(|&i| binomial_deviance(data.y()[i], theta)).sum();
                dev.iter_mut().for_each(|v| *v = d);
                return Ok(dev);
            }
            let mut fit = Path::new(&st_f, y_train);
            for (l, &lambda) in path.iter().enumerate() {
                fit.solve(lambda)?;
                dev[l] = test
                    .iter()
                    .map(|&i| {
                        let mut theta = fit.b0;
                        for (j, &b) in fit.beta.iter().enumerate() {
                            if b != 0.0 {
                                theta += b * (data.get(i, j) - st_f.means[j]) / st_f.scales[j];
                            }
                        }
                        binomial_deviance(data.y()[i], theta)
                    })
                    .sum();
            }
            Ok(dev)
        })
        .collect::<Result<_>>()?;

    let nf = data.n() as f64;
    let cv_deviance: Vec<f64> =
        (0..path.len()).map(|l| fold_dev.iter().map(|d| d[l]).sum::<f64>() / nf).collect();
    let best = cv_deviance
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let mut fit = Path::new(&st, data.y().to_vec());
    for &lambda in &path[..=best] {
        fit.solve(lambda)?;
    }
    let beta: Vec<f64> = fit
        .beta
        .iter()
        .zip(&st.scales)
        .map(|(&b, &s)| if s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = fit.b0 - beta.iter().zip(&st.means).map(|(b, m)| b * m).sum::<f64>();
    Ok(LogisticLassoFit { beta, intercept, lambda: path[best], lambda_path: path, cv_deviance })
}

/// Share of rows whose predicted class (`P(Y = 1) >= 1/2`) differs from the
/// observed label.
pub fn misclassification_rate(fit: &LogisticLassoFit, data: &DataMatrix) -> f64 {
    let wrong = (0..data.n())
        .filter(|&i| {
            let predicted = if fit.linear_predictor(data, i) >= 0.0 { 1.0 } else { 0.0 };
            predicted != data.y()[i]
        })
        .count();
    wrong as f64 / data.n() as f64
}
