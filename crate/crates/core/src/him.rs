//! Leave-one-out influence on marginal correlations.
//!
//! For observation `k` the score is the mean squared change of all `p`
//! marginal correlations when row `k` is deleted:
//!
//! ```text
//! d_k = (1/p) * sum_j (rho_j - rho_j^(k))^2
//! ```
//!
//! Under the null, `n^2 d_k` is asymptotically chi-square with one degree of
//! freedom as `p` grows, which is what [`crate::inference`] uses to attach
//! p-values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::stats::{location_scale, marginal_correlations, summarize, CorrelationVector, Estimator};

/// A leave-one-out scale at or below this fraction of the full-sample scale is
/// treated as zero.
const SCALE_COLLAPSE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceScores {
    /// Raw scores `d_k`.
    pub d: Vec<f64>,
    /// `n^2 d_k`, the calibrated statistic.
    pub stat: Vec<f64>,
    pub estimator: Estimator,
    pub n: usize,
    pub p: usize,
}

impl InfluenceScores {
    fn from_raw(d: Vec<f64>, estimator: Estimator, p: usize) -> Self {
        let n = d.len();
        let n2 = (n * n) as f64;
        let stat = d.iter().map(|v| n2 * v).collect();
        Self { d, stat, estimator, n, p }
    }
}

/// The four terms of the known-moment expansion of `d_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BDecomposition {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub k: usize,
}

impl BDecomposition {
    pub fn total(&self) -> f64 {
        self.b1 + self.b2 + self.b3 - 2.0 * self.b4
    }
}

fn collapsed(loo: f64, full: f64) -> bool {
    !(loo > SCALE_COLLAPSE * full)
}

/// Marginal correlations recomputed on the `n - 1` rows that remain after
/// deleting row `k`. Every location and scale is re-estimated on the retained
/// rows; the cross product is divided by `n - 1`.
pub fn loo_correlation(data: &DataMatrix, k: usize, estimator: Estimator) -> Result<CorrelationVector> {
    let n = data.n();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "observation {k} out of range for {n} observations"
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "leave-one-out needs at least 3 observations, got {n}"
        )));
    }
    let keep = |v: &[f64]| -> Vec<f64> {
        v.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &a)| a).collect()
    };
    let degenerate = |column| Error::DegenerateScale { column, observation: Some(k) };
    let loc_scale = |v: &[f64], column: usize| -> Result<(f64, f64)> {
        let (_, full) = location_scale(v, estimator).map_err(|_| degenerate(column))?;
        let kept = keep(v);
        let (m, s) = location_scale(&kept, estimator).map_err(|_| degenerate(column))?;
        if collapsed(s, full) {
            return Err(degenerate(column));
        }
        Ok((m, s))
    };

    let p = data.p();
    let y_kept = keep(data.y());
    let (my, sy) = loc_scale(data.y(), p)?;
    let yc: Vec<f64> = y_kept.iter().map(|v| v - my).collect();
    let denom = (n - 1) as f64;

    let mut rho = Vec::with_capacity(p);
    for (j, col) in data.columns().enumerate() {
        let (mx, sx) = loc_scale(col, j)?;
        let cross: f64 = keep(col).iter().zip(&yc).map(|(x, y)| (x - mx) * y).sum();
        rho.push(cross / (denom * sx * sy));
    }
    Ok(CorrelationVector { rho })
}

/// Direct `O(n^2 p)` evaluation: one full leave-one-out recomputation per
/// observation. Works for both estimators.
pub fn him_scores_naive(data: &DataMatrix, estimator: Estimator) -> Result<InfluenceScores> {
    let full = marginal_correlations(data, &summarize(data, estimator)?).rho;
    let p = data.p() as f64;
    let d = (0..data.n())
        .into_par_iter()
        .map(|k| {
            let loo = loo_correlation(data, k, estimator)?.rho;
            Ok(full.iter().zip(&loo).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(InfluenceScores::from_raw(d, estimator, data.p()))
}

/// Influence scores.
///
/// With the moment estimator this runs in `O(np)`: centered sums of squares
/// and cross products are computed once, and deleting row `k` is an `O(1)`
/// downdate per column,
///
/// ```text
/// S^(k) = S - n/(n-1) * c_k * e_k
/// ```
///
/// where `c_k`, `e_k` are row `k`'s deviations from the full-sample means.
/// The robust estimator has no such downdate and goes through
/// [`him_scores_naive`].
pub fn him_scores(data: &DataMatrix, estimator: Estimator) -> Result<InfluenceScores> {
    if estimator == Estimator::Robust {
        return him_scores_naive(data, estimator);
    }
    let n = data.n();
    let p = data.p();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "leave-one-out needs at least 3 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let down = nf / (nf - 1.0);

    let my = data.y().iter().sum::<f64>() / nf;
    let yc: Vec<f64> = data.y().iter().map(|v| v - my).collect();
    let syy: f64 = yc.iter().map(|v| v * v).sum();

    // Per column: centered values, S_xx and S_xy.
    let mut xc = Vec::with_capacity(n * p);
    let mut sxx = Vec::with_capacity(p);
    let mut sxy = Vec::with_capacity(p);
    for col in data.columns() {
        let mx = col.iter().sum::<f64>() / nf;
        let start = xc.len();
        xc.extend(col.iter().map(|v| v - mx));
        let c = &xc[start..];
        sxx.push(c.iter().map(|v| v * v).sum::<f64>());
        sxy.push(c.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>());
    }

    // rho_j = (n-1)/n * S_xy / sqrt(S_xx S_yy)
    // rho_j^(k) = (n-2)/(n-1) * S_xy^(k) / sqrt(S_xx^(k) S_yy^(k))
    let full_factor = (nf - 1.0) / nf;
    let loo_factor = (nf - 2.0) / (nf - 1.0);
    let rho: Vec<f64> = (0..p)
        .map(|j| full_factor * sxy[j] / (sxx[j] * syy).sqrt())
        .collect();

    let d = (0..n)
        .into_par_iter()
        .map(|k| {
            let e = yc[k];
            let syy_k = syy - down * e * e;
            if collapsed(syy_k.max(0.0).sqrt(), syy.sqrt()) {
                return Err(Error::DegenerateScale { column: p, observation: Some(k) });
            }
            let mut acc = 0.0;
            for j in 0..p {
                let c = xc[j * n + k];
                let sxx_k = sxx[j] - down * c * c;
                if collapsed(sxx_k.max(0.0).sqrt(), sxx[j].sqrt()) {
                    return Err(Error::DegenerateScale { column: j, observation: Some(k) });
                }
                let sxy_k = sxy[j] - down * c * e;
                let rho_k = loo_factor * sxy_k / (sxx_k * syy_k).sqrt();
                let diff = rho[j] - rho_k;
                acc += diff * diff;
            }
            Ok(acc / p as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(InfluenceScores::from_raw(d, estimator, p))
}

/// The expansion `d_k = B1 + B2 + B3 - 2 B4` under the known-moment
/// convention (`rho_j = n^-1 sum_i x_ij y_i`, no re-centering), with
/// `K_ts = sum_j x_tj x_sj / p`:
///
/// ```text
/// B1 = [n(n-1)]^-2       sum_t y_t^2 K_tt
/// B2 = (n-2)/(n(n-1)^2)  y_k^2 K_kk
/// B3 = [n(n-1)]^-2       sum_{t != s} y_t y_s K_ts
/// B4 = 1/(n(n-1)^2)      sum_{t != k} y_k y_t K_tk
/// ```
///
/// The caller is responsible for supplying data already standardized by the
/// true moments.
pub fn b_decomposition(z: &DataMatrix, k: usize) -> Result<BDecomposition> {
    let n = z.n();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "observation {k} out of range for {n} observations"
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 observations, got {n}")));
    }
    let nf = n as f64;
    let pf = z.p() as f64;
    let y = z.y();

    // K_tt for all t, and K_tk for the fixed k.
    let mut k_diag = vec![0.0; n];
    let mut k_row = vec![0.0; n];
    // sum_j [(sum_t y_t x_tj)^2 - sum_t y_t^2 x_tj^2] = p * sum_{t != s} y_t y_s K_ts
    let mut off_diag = 0.0;
    for col in z.columns() {
        let xk = col[k];
        let mut lin = 0.0;
        let mut sq = 0.0;
        for t in 0..n {
            let x = col[t];
            k_diag[t] += x * x;
            k_row[t] += x * xk;
            lin += y[t] * x;
            sq += (y[t] * x).powi(2);
        }
        off_diag += lin * lin - sq;
    }
    k_diag.iter_mut().for_each(|v| *v /= pf);
    k_row.iter_mut().for_each(|v| *v /= pf);

    let nn1 = nf * (nf - 1.0);
    let b1 = y.iter().zip(&k_diag).map(|(yt, kt)| yt * yt * kt).sum::<f64>() / (nn1 * nn1);
    let b2 = (nf - 2.0) / (nf * (nf - 1.0).powi(2)) * y[k] * y[k] * k_diag[k];
    let b3 = off_diag / pf / (nn1 * nn1);
    let b4 = (0..n)
        .filter(|&t| t != k)
        .map(|t| y[k] * y[t] * k_row[t])
        .sum::<f64>()
        / (nf * (nf - 1.0).powi(2));
    Ok(BDecomposition { b1, b2, b3, b4, k })
}
