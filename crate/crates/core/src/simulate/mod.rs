//! Seeded generators for the perturbation models and the logistic model, and
//! a replication driver that aggregates metrics into tables.
//!
//! Every replication owns independent random substreams derived from
//! `(seed, replication)`, so results do not depend on scheduling.

mod driver;
mod generate;

pub use driver::{
    run_replications, substream, Pipeline, ReplicationOutcome, SimulationTable, Stream, TableRow,
    CSV_HEADER,
};
pub use generate::{
    gen_logistic, gen_model1, gen_model2, gen_model3, generate, sample_ar1_row, BaseDraws,
    GeneratedInstance, TruthMeta, AR_RHO, LINEAR_BETA, LINEAR_SUPPORT,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Contaminated responses.
    M1,
    /// Shifted predictors on a column set.
    M2,
    /// Both.
    M3,
    /// Binary response with a contaminated coefficient block.
    Logistic,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::M1 => "m1",
            Model::M2 => "m2",
            Model::M3 => "m3",
            Model::Logistic => "logistic",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(Model::M1),
            "m2" => Ok(Model::M2),
            "m3" => Ok(Model::M3),
            "logistic" => Ok(Model::Logistic),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

/// Which predictor columns receive the covariate shift (1-based in the
/// usual notation: `{1..100}`, `{p-100..p}`, `{1..p}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftSet {
    #[default]
    S1,
    S2,
    S3,
}

impl ShiftSet {
    /// Zero-based column indices.
    pub fn columns(self, p: usize) -> std::ops::Range<usize> {
        match self {
            ShiftSet::S1 => 0..p.min(100),
            ShiftSet::S2 => p.saturating_sub(101)..p,
            ShiftSet::S3 => 0..p,
        }
    }
}

impl std::fmt::Display for ShiftSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShiftSet::S1 => "s1",
            ShiftSet::S2 => "s2",
            ShiftSet::S3 => "s3",
        })
    }
}

impl std::str::FromStr for ShiftSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(ShiftSet::S1),
            "s2" => Ok(ShiftSet::S2),
            "s3" => Ok(ShiftSet::S3),
            other => Err(Error::InvalidArgument(format!("unknown shift set '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub n_infl: usize,
    pub kappa: f64,
    pub s_set: ShiftSet,
    pub alpha: f64,
    pub seed: u64,
    pub replications: usize,
    /// Screening size; `floor(n / ln n)` when unset.
    pub sis_size: Option<usize>,
    pub cv_folds: usize,
    pub n_lambda: usize,
}

impl SimulationSpec {
    pub fn new(model: Model) -> Self {
        let p = if model == Model::Logistic { 50 } else { 1000 };
        Self {
            model,
            n: 100,
            p,
            n_infl: 10,
            kappa: 0.0,
            s_set: ShiftSet::S1,
            alpha: crate::inference::DEFAULT_ALPHA,
            seed: 0,
            replications: 200,
            sis_size: None,
            cv_folds: 10,
            n_lambda: crate::downstream::DEFAULT_N_LAMBDA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_infl >= self.n {
            return Err(Error::InvalidArgument(format!(
                "n_infl = {} must be below n = {}",
                self.n_infl, self.n
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("kappa must be nonnegative, got {}", self.kappa)));
        }
        if self.n < 3 {
            return Err(Error::InsufficientData(format!("n = {} is too small", self.n)));
        }
        match self.model {
            Model::Logistic if self.p < 2 || !self.p.is_multiple_of(2) => Err(Error::InvalidArgument(format!(
                "the logistic model needs an even p >= 2, got {}",
                self.p
            ))),
            Model::M1 | Model::M2 | Model::M3 if self.p < LINEAR_BETA.len() => {
                Err(Error::InvalidArgument(format!("linear models need p >= 5, got {}", self.p)))
            }
            _ => Ok(()),
        }
    }

    pub fn sis_size(&self) -> usize {
        self.sis_size.unwrap_or_else(|| crate::downstream::default_sis_size(self.n))
    }
}
