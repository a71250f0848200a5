//! Cyclic coordinate-descent lasso with a warm-started path and K-fold
//! cross-validation.
//!
//! Predictors are centered and scaled to unit `1/n` variance internally, the
//! response is centered, and the objective is
//! `(1/2n) ||y - b0 - X b||^2 + lambda ||b||_1`. Coefficients are reported on
//! the original scale. Convergence tolerances are relative to the `1/n`
//! standard deviation of the response, so they mean the same thing for any
//! response units.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_N_LAMBDA: usize = 100;
/// Smallest path value as a fraction of `lambda_max`.
pub const DEFAULT_LAMBDA_RATIO: f64 = 1e-3;
/// The path stops early once this fraction of the response variance is
/// explained, since smaller penalties only interpolate noise.
pub const SATURATION_RATIO: f64 = 0.999;
/// ...or once a path step explains less than this extra fraction.
pub const MIN_DEVIANCE_GAIN: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    /// Original-scale coefficients (no intercept).
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Descending.
    pub lambda_path: Vec<f64>,
    /// Mean held-out squared error per path value; empty for single fits.
    pub cv_errors: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Standardized copy of (a subset of) the data.
pub(super) struct Standardized {
    pub n: usize,
    pub p: usize,
    /// Column-major, each column centered with unit `1/n` variance. Constant
    /// columns are all zero and flagged by a zero scale.
    pub z: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub y_mean: f64,
    pub yc: Vec<f64>,
    /// `1/n` standard deviation of the response.
    pub y_scale: f64,
}

impl Standardized {
    pub fn new(data: &DataMatrix, rows: Option<&[usize]>) -> Self {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..data.n()).collect();
                &all
            }
        };
        let n = rows.len();
        let nf = n as f64;
        let p = data.p();
        let mut z = Vec::with_capacity(n * p);
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for col in data.columns() {
            let mean = rows.iter().map(|&i| col[i]).sum::<f64>() / nf;
            let var = rows.iter().map(|&i| (col[i] - mean).powi(2)).sum::<f64>() / nf;
            let scale = var.sqrt();
            if scale > 0.0 {
                z.extend(rows.iter().map(|&i| (col[i] - mean) / scale));
            } else {
                z.extend(std::iter::repeat_n(0.0, n));
            }
            means.push(mean);
            scales.push(if scale > 0.0 { scale } else { 0.0 });
        }
        let y = data.y();
        let y_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / nf;
        let yc: Vec<f64> = rows.iter().map(|&i| y[i] - y_mean).collect();
        let y_scale = (dot(&yc, &yc) / nf).sqrt();
        Self { n, p, z, means, scales, y_mean, yc, y_scale }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.z[j * self.n..(j + 1) * self.n]
    }

    /// `max_j |z_j' y| / n`, the smallest penalty that zeroes every coefficient.
    pub fn lambda_max(&self) -> f64 {
        (0..self.p)
            .map(|j| dot(self.col(j), &self.yc).abs() / self.n as f64)
            .fold(0.0, f64::max)
    }

    /// Maps standardized coefficients back to the original scale.
    pub fn unscale(&self, beta_std: &[f64]) -> (Vec<f64>, f64) {
        let beta: Vec<f64> = beta_std
            .iter()
            .zip(&self.scales)
            .map(|(&b, &s)| if s > 0.0 { b / s } else { 0.0 })
            .collect();
        let intercept = self.y_mean - beta.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        (beta, intercept)
    }
}

#[inline]
pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Coordinate-descent state: standardized coefficients and current residual.
pub(super) struct Solver<'a> {
    st: &'a Standardized,
    pub beta: Vec<f64>,
    pub resid: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(st: &'a Standardized) -> Self {
        Self { st, beta: vec![0.0; st.p], resid: st.yc.clone() }
    }

    fn update(&mut self, j: usize, lambda: f64) -> f64 {
        if self.st.scales[j] == 0.0 {
            return 0.0;
        }
        let col = self.st.col(j);
        let old = self.beta[j];
        let z = old + dot(col, &self.resid) / self.st.n as f64;
        let new = soft_threshold(z, lambda);
        let delta = new - old;
        if delta != 0.0 {
            for (r, x) in self.resid.iter_mut().zip(col) {
                *r -= delta * x;
            }
            self.beta[j] = new;
        }
        delta.abs()
    }

    fn sweep(&mut self, lambda: f64, active: Option<&[usize]>) -> f64 {
        let mut max_change = 0.0f64;
        match active {
            Some(set) => {
                for &j in set {
                    max_change = max_change.max(self.update(j, lambda));
                }
            }
            None => {
                for j in 0..self.st.p {
                    max_change = max_change.max(self.update(j, lambda));
                }
            }
        }
        max_change
    }

    /// Runs until a full sweep moves no coefficient by more than `tol` times
    /// the response scale. Between full sweeps it iterates on the current
    /// nonzero set only.
    pub fn solve(
        &mut self,
        lambda: f64,
        tol: f64,
        max_iter: usize,
        mut on_sweep: Option<&mut dyn FnMut(&Self)>,
    ) -> Result<usize> {
        let tol = tol * self.st.y_scale;
        let mut sweeps = 0;
        let mut last = f64::INFINITY;
        while sweeps < max_iter {
            last = self.sweep(lambda, None);
            sweeps += 1;
            if let Some(f) = on_sweep.as_deref_mut() {
                f(self);
            }
            if last <= tol {
                return Ok(sweeps);
            }
            let active: Vec<usize> = (0..self.st.p).filter(|&j| self.beta[j] != 0.0).collect();
            while sweeps < max_iter {
                last = self.sweep(lambda, Some(&active));
                sweeps += 1;
                if let Some(f) = on_sweep.as_deref_mut() {
                    f(self);
                }
                if last <= tol {
                    break;
                }
            }
        }
        Err(Error::ConvergenceFailure { iterations: sweeps, max_change: last })
    }

    #[cfg(test)]
    pub fn objective(&self, lambda: f64) -> f64 {
        let n = self.st.n as f64;
        dot(&self.resid, &self.resid) / (2.0 * n)
            + lambda * self.beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    pub fn rss(&self) -> f64 {
        dot(&self.resid, &self.resid)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Single-penalty fit.
pub fn lasso_cd(data: &DataMatrix, lambda: f64, tol: f64, max_iter: usize) -> Result<LassoFit> {
    check_lambda(lambda)?;
    let st = Standardized::new(data, None);
    let mut solver = Solver::new(&st);
    solver.solve(lambda, tol, max_iter, None)?;
    let (beta, intercept) = st.unscale(&solver.beta);
    Ok(LassoFit {
        beta,
        intercept,
        lambda,
        lambda_path: vec![lambda],
        cv_errors: Vec::new(),
        folds: 0,
        seed: 0,
    })
}

/// `(1/2n) ||y - b0 - X b||^2 + lambda ||b_std||_1` for an original-scale fit,
/// where the penalty is taken on the standardized coefficients.
pub fn lasso_objective(data: &DataMatrix, fit: &LassoFit) -> f64 {
    let st = Standardized::new(data, None);
    let n = data.n();
    let mut rss = 0.0;
    for i in 0..n {
        let pred = fit.intercept + (0..data.p()).map(|j| fit.beta[j] * data.get(i, j)).sum::<f64>();
        rss += (data.y()[i] - pred).powi(2);
    }
    let l1: f64 = fit.beta.iter().zip(&st.scales).map(|(b, s)| (b * s).abs()).sum();
    rss / (2.0 * n as f64) + fit.lambda * l1
}

/// Largest violation of the lasso optimality conditions on the standardized
/// scale: `|g_j - lambda sign(b_j)|` for active and `(|g_j| - lambda)+` for
/// inactive coordinates, where `g_j = z_j' r / n`.
pub fn kkt_max_violation(data: &DataMatrix, fit: &LassoFit) -> f64 {
    let st = Standardized::new(data, None);
    let beta_std: Vec<f64> = fit.beta.iter().zip(&st.scales).map(|(b, s)| b * s).collect();
    let mut resid = st.yc.clone();
    for (j, &b) in beta_std.iter().enumerate() {
        if b != 0.0 {
            for (r, x) in resid.iter_mut().zip(st.col(j)) {
                *r -= b * x;
            }
        }
    }
    let n = st.n as f64;
    (0..st.p)
        .filter(|&j| st.scales[j] > 0.0)
        .map(|j| {
            let g = dot(st.col(j), &resid) / n;
            let b = beta_std[j];
            if b != 0.0 {
                (g - fit.lambda * b.signum()).abs()
            } else {
                (g.abs() - fit.lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Deterministic fold labels: a seeded shuffle of `0..n`, dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut label = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        label[i] = pos % folds;
    }
    label
}

pub(super) fn log_path(max: f64, ratio: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![max];
    }
    (0..len)
        .map(|i| max * ratio.powf(i as f64 / (len - 1) as f64))
        .collect()
}

/// Path of up to `n_lambda` log-spaced penalties from `lambda_max` down to
/// `1e-3 lambda_max`, K-fold cross-validated on squared error. Returns the
/// full-data fit at the CV-minimizing penalty.
///
/// The full-data path is fitted first and truncated where the fit saturates
/// (see [`SATURATION_RATIO`] and [`MIN_DEVIANCE_GAIN`]); the folds are then
/// evaluated on that same penalty sequence.
pub fn lasso_path_cv(data: &DataMatrix, n_lambda: usize, folds: usize, seed: u64) -> Result<LassoFit> {
    if folds < 2 || folds > data.n() {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= folds <= n, got {folds} folds for {} observations",
            data.n()
        )));
    }
    if n_lambda == 0 {
        return Err(Error::InvalidArgument("empty penalty path".into()));
    }
    let st = Standardized::new(data, None);
    let lambda_max = st.lambda_max();
    if !(lambda_max > 0.0) {
        return Err(Error::DegenerateResponse("response is uncorrelated with every predictor".into()));
    }
    let mut path = log_path(lambda_max, DEFAULT_LAMBDA_RATIO, n_lambda);

    let tss = dot(&st.yc, &st.yc);
    let mut solver = Solver::new(&st);
    let mut betas = Vec::with_capacity(path.len());
    let mut prev_ratio = 0.0;
    for (l, &lambda) in path.iter().enumerate() {
        solver.solve(lambda, DEFAULT_TOL, DEFAULT_MAX_ITER, None)?;
        betas.push(solver.beta.clone());
        let ratio = 1.0 - solver.rss() / tss;
        if ratio >= SATURATION_RATIO || (l > 0 && ratio - prev_ratio < MIN_DEVIANCE_GAIN * ratio) {
            break;
        }
        prev_ratio = ratio;
    }
    path.truncate(betas.len());

    let labels = fold_assignment(data.n(), folds, seed);
    let fold_sse: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != f).collect();
            let test: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == f).collect();
            let st_f = Standardized::new(data, Some(&train));
            let mut solver = Solver::new(&st_f);
            let mut sse = Vec::with_capacity(path.len());
            for &lambda in &path {
                solver.solve(lambda, DEFAULT_TOL, DEFAULT_MAX_ITER, None)?;
                let mut err = 0.0;
                for &i in &test {
                    let mut pred = st_f.y_mean;
                    for (j, &b) in solver.beta.iter().enumerate() {
                        if b != 0.0 {
                            pred += b * (data.get(i, j) - st_f.means[j]) / st_f.scales[j];
                        }
                    }
                    err += (data.y()[i] - pred).powi(2);
                }
                sse.push(err);
            }
            Ok(sse)
        })
        .collect::<Result<_>>()?;

    let nf = data.n() as f64;
    let cv_errors: Vec<f64> =
        (0..path.len()).map(|l| fold_sse.iter().map(|s| s[l]).sum::<f64>() / nf).collect();
    let best = cv_errors
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let (beta, intercept) = st.unscale(&betas[best]);
    Ok(LassoFit {
        beta,
        intercept,
        lambda: path[best],
        lambda_path: path,
        cv_errors,
        folds,
        seed,
    })
}
