//! Classical Cook's distance for the `n > p + 1` regime.
//!
//! Both the case-deletion form and the residual/leverage form are provided,
//! each normalized by `(p + 1) sigma^2` so they agree exactly.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;
const LEVERAGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first, then one coefficient per predictor.
    pub beta: Vec<f64>,
    /// Fitted minus observed, `yhat_k - y_k`.
    pub residuals: Vec<f64>,
    pub hat_diag: Vec<f64>,
    /// `sum residuals^2 / (n - p - 1)`.
    pub sigma2: f64,
    pub n: usize,
    pub p: usize,
}

fn design_matrix(data: &DataMatrix) -> DMatrix<f64> {
    let n = data.n();
    DMatrix::from_fn(n, data.p() + 1, |i, j| if j == 0 { 1.0 } else { data.get(i, j - 1) })
}

/// Least squares through a thin QR factorization. Returns the coefficients
/// and the orthonormal factor.
fn least_squares(design: DMatrix<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let qr = design.qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_diag == 0.0 || r.diagonal().iter().any(|v| v.abs() <= RANK_TOL * max_diag) {
        return None;
    }
    let q = qr.q();
    let beta = r.solve_upper_triangular(&(q.transpose() * y))?;
    Some((beta, q))
}

pub fn ols_fit(data: &DataMatrix) -> Result<OlsFit> {
    let (n, p) = (data.n(), data.p());
    if n <= p + 1 {
        return Err(Error::DimensionError(format!(
            "ordinary least squares needs n > p + 1, got n = {n}, p = {p}"
        )));
    }
    let design = design_matrix(data);
    let y = DVector::from_column_slice(data.y());
    let (beta, q) =
        least_squares(design.clone(), &y).ok_or(Error::SingularDesign { observation: None })?;
    let fitted = &design * &beta;
    let residuals: Vec<f64> = fitted.iter().zip(y.iter()).map(|(f, o)| f - o).collect();
    let hat_diag = q.row_iter().map(|row| row.norm_squared()).collect();
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / (n - p - 1) as f64;
    Ok(OlsFit { beta: beta.iter().copied().collect(), residuals, hat_diag, sigma2, n, p })
}

/// Residual RMS below this fraction of the response RMS counts as an exact fit.
const EXACT_FIT_RATIO: f64 = 1e-10;

fn check_sigma2(fit_sigma2: f64, y: &[f64]) -> Result<()> {
    let scale = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    if !(fit_sigma2 > EXACT_FIT_RATIO * EXACT_FIT_RATIO * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateFit);
    }
    Ok(())
}

/// Case-deletion form: refits without each row and measures
/// `(b^(k) - b)' X'X (b^(k) - b) / ((p + 1) sigma^2)`.
pub fn cooks_distance_deletion(data: &DataMatrix) -> Result<Vec<f64>> {
    let fit = ols_fit(data)?;
    check_sigma2(fit.sigma2, data.y())?;
    let design = design_matrix(data);
    let beta = DVector::from_vec(fit.beta.clone());
    let denom = (fit.p + 1) as f64 * fit.sigma2;
    let n = data.n();

    (0..n)
        .into_par_iter()
        .map(|k| {
            // Deleting a point that lies on the fitted surface leaves the fit
            // unchanged; skip the refit so roundoff cannot leak in.
            if fit.residuals[k] == 0.0 {
                return Ok(0.0);
            }
            let rows: Vec<usize> = (0..n).filter(|&i| i != k).collect();
            let reduced = design.select_rows(&rows);
            let y_k = DVector::from_iterator(n - 1, rows.iter().map(|&i| data.y()[i]));
            let (beta_k, _) = least_squares(reduced, &y_k)
                .ok_or(Error::SingularDesign { observation: Some(k) })?;
            let shift = &design * (beta_k - &beta);
            Ok(shift.norm_squared() / denom)
        })
        .collect()
}

/// One observation's distance from its residual and leverage:
/// `e^2 / ((p + 1) sigma^2) * h / (1 - h)^2`.
pub fn cooks_from_parts(residual: f64, leverage: f64, sigma2: f64, p: usize) -> f64 {
    residual * residual / ((p + 1) as f64 * sigma2) * leverage / (1.0 - leverage).powi(2)
}

/// Closed form from an existing fit, `O(n)`.
pub fn cooks_distance_hat(fit: &OlsFit) -> Result<Vec<f64>> {
    if !(fit.sigma2 > 0.0) {
        return Err(Error::DegenerateFit);
    }
    fit.residuals
        .iter()
        .zip(&fit.hat_diag)
        .enumerate()
        .map(|(k, (&e, &h))| {
            if 1.0 - h <= LEVERAGE_TOL {
                return Err(Error::ExactLeverage(k));
            }
            Ok(cooks_from_parts(e, h, fit.sigma2, fit.p))
        })
        .collect()
}
