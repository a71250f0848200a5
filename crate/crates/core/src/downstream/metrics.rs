use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-replication evaluation. Pipelines fill in the metrics they produce.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    pub err: Option<f64>,
    pub fpr: Option<f64>,
    pub cp: Option<f64>,
    pub power: Option<f64>,
    pub fdr: Option<f64>,
}

/// Indices of nonzero coefficients.
pub fn support(beta: &[f64]) -> Vec<usize> {
    beta.iter().enumerate().filter(|(_, &b)| b != 0.0).map(|(j, _)| j).collect()
}

/// `||beta_hat - beta_true||_2`.
pub fn eval_err(beta_hat: &[f64], beta_true: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::DimensionError(format!(
            "coefficient vectors have lengths {} and {}",
            beta_hat.len(),
            beta_true.len()
        )));
    }
    Ok(beta_hat.iter().zip(beta_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// False positives over true negatives.
pub fn eval_fpr(selected: &[usize], true_support: &[usize], p: usize) -> f64 {
    let truth: BTreeSet<_> = true_support.iter().collect();
    let negatives = p - truth.len();
    if negatives == 0 {
        return 0.0;
    }
    let fp = selected.iter().collect::<BTreeSet<_>>().difference(&truth).count();
    fp as f64 / negatives as f64
}

/// 1 when every true index was selected.
pub fn eval_cp(selected: &[usize], true_support: &[usize]) -> f64 {
    let sel: BTreeSet<_> = selected.iter().collect();
    if true_support.iter().all(|j| sel.contains(j)) {
        1.0
    } else {
        0.0
    }
}

/// `(n_tp / n_infl, n_fp / r)` with `0/0 := 0` for both.
pub fn eval_power_fdr(flagged: &[usize], true_influential: &[usize]) -> (f64, f64) {
    let truth: BTreeSet<_> = true_influential.iter().collect();
    let flagged: BTreeSet<_> = flagged.iter().collect();
    let tp = flagged.intersection(&truth).count();
    let fp = flagged.len() - tp;
    let power = if truth.is_empty() { 0.0 } else { tp as f64 / truth.len() as f64 };
    let fdr = if flagged.is_empty() { 0.0 } else { fp as f64 / flagged.len() as f64 };
    (power, fdr)
}
