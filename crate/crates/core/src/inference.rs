//! p-values, Benjamini-Hochberg selection and the diagnosis pipeline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::him::{him_scores, InfluenceScores};
use crate::stats::{chisq1_sf, Estimator};

/// FDR level used throughout the simulation study.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub scores: InfluenceScores,
    pub pvalues: Vec<f64>,
    pub alpha: f64,
    /// Strictly increasing row indices.
    pub flagged: Vec<usize>,
    pub estimator: Estimator,
    pub provenance: Provenance,
}

/// `P(chi2_1 > n^2 d_k)` for every observation.
pub fn pvalues(scores: &InfluenceScores) -> Vec<f64> {
    scores
        .stat
        .iter()
        .map(|&t| chisq1_sf(t.max(0.0)).unwrap_or(0.0))
        .collect()
}

/// Benjamini-Hochberg step-up at level `alpha`. Returns the rejected indices
/// in increasing order. Every p-value tied with the largest accepted order
/// statistic is rejected too.
pub fn bh_select(pvalues: &[f64], alpha: f64) -> Vec<usize> {
    let m = pvalues.len();
    if m == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));

    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|&(rank, &idx)| pvalues[idx] <= (rank + 1) as f64 * alpha / m as f64)
        .map(|(_, &idx)| pvalues[idx]);

    match cutoff {
        Some(t) => (0..m).filter(|&i| pvalues[i] <= t).collect(),
        None => Vec::new(),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Scores, p-values and BH flags in one report.
pub fn diagnose(data: &DataMatrix, alpha: f64, estimator: Estimator) -> Result<DiagnosisReport> {
    check_alpha(alpha)?;
    let scores = him_scores(data, estimator)?;
    let pvalues = pvalues(&scores);
    let flagged = bh_select(&pvalues, alpha);
    let mut params = BTreeMap::new();
    params.insert("alpha".to_owned(), alpha.to_string());
    params.insert("estimator".to_owned(), estimator.to_string());
    params.insert("scale_divisor".to_owned(), "n-1".to_owned());
    params.insert("correlation_divisor".to_owned(), "n".to_owned());
    Ok(DiagnosisReport {
        scores,
        pvalues,
        alpha,
        flagged,
        estimator,
        provenance: Provenance { dataset: String::new(), params },
    })
}

/// Data with some rows dropped, remembering which.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedData {
    pub data: DataMatrix,
    pub removed: Vec<usize>,
    /// Original index of every surviving row.
    pub kept: Vec<usize>,
}

/// Drops `flagged` rows; survivors keep their relative order.
pub fn remove_rows(data: &DataMatrix, flagged: &[usize]) -> Result<ReducedData> {
    let n = data.n();
    let mut drop = vec![false; n];
    for &i in flagged {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "flagged index {i} out of range for {n} observations"
            )));
        }
        drop[i] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !drop[i]).collect();
    if kept.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} observations would remain",
            kept.len()
        )));
    }
    let removed = (0..n).filter(|&i| drop[i]).collect();
    Ok(ReducedData { data: data.select_rows(&kept)?, removed, kept })
}
