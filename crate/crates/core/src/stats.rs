//! Column summaries, standardization and marginal correlations.
//!
//! Conventions: the moment scale is the `(n - 1)`-divisor sample standard
//! deviation, while the full-sample marginal correlation divides the centered
//! cross product by `n`. Under moment estimation this keeps
//! `|rho_j| <= (n - 1) / n`.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Normal-consistency constant for the median absolute deviation.
pub const MAD_SCALE: f64 = 1.4826;

/// Location/scale estimator used for standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Sample mean and `(n - 1)`-divisor standard deviation.
    #[default]
    Moment,
    /// Median and 1.4826-scaled median absolute deviation.
    Robust,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Moment => "moment",
            Estimator::Robust => "robust",
        })
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "moment" => Ok(Estimator::Moment),
            "robust" => Ok(Estimator::Robust),
            other => Err(Error::InvalidArgument(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationSummary {
    pub mu_x: Vec<f64>,
    pub sigma_x: Vec<f64>,
    pub mu_y: f64,
    pub sigma_y: f64,
    pub estimator: Estimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationVector {
    pub rho: Vec<f64>,
}

/// Mean and `(n - 1)`-divisor standard deviation, single pass (Welford).
pub fn column_moments(v: &[f64]) -> Result<(f64, f64)> {
    if v.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "moments need at least 2 values, got {}",
            v.len()
        )));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let sd = (m2.max(0.0) / (v.len() - 1) as f64).sqrt();
    Ok((mean, sd))
}

/// Sample median; the mean of the two middle values for even length.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len().is_multiple_of(2) {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

/// Median and `1.4826 * MAD`.
pub fn robust_location_scale(v: &[f64]) -> Result<(f64, f64)> {
    if v.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "robust scale needs at least 2 values, got {}",
            v.len()
        )));
    }
    let med = median(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    let scale = MAD_SCALE * median(&dev);
    if scale <= 0.0 {
        return Err(Error::DegenerateScale { column: 0, observation: None });
    }
    Ok((med, scale))
}

pub fn location_scale(v: &[f64], estimator: Estimator) -> Result<(f64, f64)> {
    match estimator {
        Estimator::Moment => column_moments(v),
        Estimator::Robust => robust_location_scale(v),
    }
}

/// Location and scale of every column and of the response.
pub fn summarize(data: &DataMatrix, estimator: Estimator) -> Result<StandardizationSummary> {
    let p = data.p();
    let mut mu_x = Vec::with_capacity(p);
    let mut sigma_x = Vec::with_capacity(p);
    for (j, col) in data.columns().enumerate() {
        let (m, s) = checked_location_scale(col, estimator, j)?;
        mu_x.push(m);
        sigma_x.push(s);
    }
    let (mu_y, sigma_y) = checked_location_scale(data.y(), estimator, p)?;
    Ok(StandardizationSummary { mu_x, sigma_x, mu_y, sigma_y, estimator })
}

fn checked_location_scale(v: &[f64], estimator: Estimator, column: usize) -> Result<(f64, f64)> {
    let (m, s) = location_scale(v, estimator).map_err(|e| match e {
        Error::DegenerateScale { .. } => Error::DegenerateScale { column, observation: None },
        other => other,
    })?;
    if s <= 0.0 {
        return Err(Error::DegenerateScale { column, observation: None });
    }
    Ok((m, s))
}

/// Centers and scales every column and the response. Degenerate columns are
/// reported with their index (the response is index `p`).
pub fn standardize(
    data: &DataMatrix,
    estimator: Estimator,
) -> Result<(StandardizationSummary, DataMatrix)> {
    let summary = summarize(data, estimator)?;
    let n = data.n();
    let mut x = Vec::with_capacity(n * data.p());
    for (j, col) in data.columns().enumerate() {
        let (m, s) = (summary.mu_x[j], summary.sigma_x[j]);
        x.extend(col.iter().map(|v| (v - m) / s));
    }
    let y = data.y().iter().map(|v| (v - summary.mu_y) / summary.sigma_y).collect();
    let mut out = DataMatrix::from_columns_unchecked(n, data.p(), x, y)?;
    if let Some(names) = data.column_names() {
        out = out.with_column_names(names.to_vec())?;
    }
    Ok((summary, out))
}

/// `rho_j = sum_i (x_ij - mu_xj)(y_i - mu_y) / (n sigma_xj sigma_y)`.
pub fn marginal_correlations(data: &DataMatrix, summary: &StandardizationSummary) -> CorrelationVector {
    let n = data.n() as f64;
    let yc: Vec<f64> = data.y().iter().map(|v| v - summary.mu_y).collect();
    let rho = data
        .columns()
        .enumerate()
        .map(|(j, col)| {
            let mu = summary.mu_x[j];
            let cross: f64 = col.iter().zip(&yc).map(|(x, y)| (x - mu) * y).sum();
            cross / (n * summary.sigma_x[j] * summary.sigma_y)
        })
        .collect();
    CorrelationVector { rho }
}

/// Upper tail of the chi-square distribution with one degree of freedom,
/// `P(chi2_1 > t) = erfc(sqrt(t / 2))`.
pub fn chisq1_sf(t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "chi-square statistic must be finite and nonnegative, got {t}"
        )));
    }
    Ok(libm::erfc((0.5 * t).sqrt()).clamp(0.0, 1.0))
}
