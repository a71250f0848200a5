//! Influence diagnostics for regressions with far more predictors than
//! observations.
//!
//! The central quantity is the leave-one-out change in all marginal
//! correlations between the response and each predictor ([`him`]). Its scaled
//! form is calibrated against a chi-square(1) reference ([`inference`]), which
//! yields p-values and Benjamini-Hochberg flags. Classical Cook's distance
//! ([`cooks`]), a marginal-GLM analogue ([`glm`]), downstream screening and
//! lasso analyses ([`downstream`]) and a seeded simulation driver
//! ([`simulate`]) round out the crate.

pub mod cooks;
pub mod data;
pub mod downstream;
pub mod error;
pub mod glm;
pub mod him;
pub mod inference;
pub mod simulate;
pub mod stats;

pub use cooks::{cooks_distance_deletion, cooks_distance_hat, ols_fit, OlsFit};
pub use data::DataMatrix;
pub use error::{Error, Result};
pub use glm::{glm_him_scores, rank_influential, GlmInfluenceScores, MarginalGlmFit};
pub use him::{b_decomposition, him_scores, him_scores_naive, loo_correlation, BDecomposition, InfluenceScores};
pub use inference::{bh_select, diagnose, pvalues, remove_rows, DiagnosisReport, Provenance, DEFAULT_ALPHA};
pub use stats::{chisq1_sf, CorrelationVector, Estimator, StandardizationSummary};
