use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate, BaseDraws, GeneratedInstance, LINEAR_SUPPORT};
use super::{Model, SimulationSpec};
use crate::downstream::{
    eval_cp, eval_err, eval_fpr, eval_power_fdr, lasso_path_cv, logistic_lasso_cv,
    misclassification_rate, sis_screen, support,
};
use crate::error::{Error, Result};
use crate::glm::{glm_him_scores, rank_influential};
use crate::inference::{diagnose, remove_rows};
use crate::stats::Estimator;

pub const CSV_HEADER: [&str; 9] =
    ["model", "kappa", "s_set", "pipeline", "metric", "mean", "mc_se", "n_reps", "n_failures"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pipeline {
    Him,
    Sis,
    SisHim,
    Lasso,
    LassoHim,
    GlmHim,
}

impl Pipeline {
    pub const LINEAR: [Pipeline; 5] =
        [Pipeline::Him, Pipeline::Sis, Pipeline::SisHim, Pipeline::Lasso, Pipeline::LassoHim];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Him => "HIM",
            Pipeline::Sis => "SIS",
            Pipeline::SisHim => "SIS+HIM",
            Pipeline::Lasso => "LASSO",
            Pipeline::LassoHim => "LASSO+HIM",
            Pipeline::GlmHim => "GLM-HIM",
        }
    }

    /// Metric names this pipeline reports at the given `kappa`. Power is
    /// undefined without contamination.
    pub fn metrics(self, kappa: f64) -> Vec<&'static str> {
        let mut m: Vec<&'static str> = match self {
            Pipeline::Him => vec!["power", "fdr", "n_flagged"],
            Pipeline::Sis | Pipeline::SisHim => vec!["cp"],
            Pipeline::Lasso | Pipeline::LassoHim => vec!["err", "fpr"],
            Pipeline::GlmHim => vec!["power", "e_full", "e_redu"],
        };
        if kappa == 0.0 {
            m.retain(|&name| name != "power");
        }
        m
    }

    pub fn supports(self, model: Model) -> bool {
        (self == Pipeline::GlmHim) == (model == Model::Logistic)
    }

    pub fn defaults_for(model: Model) -> Vec<Pipeline> {
        if model == Model::Logistic {
            vec![Pipeline::GlmHim]
        } else {
            Pipeline::LINEAR.to_vec()
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace('_', "+");
        [Pipeline::Him, Pipeline::Sis, Pipeline::SisHim, Pipeline::Lasso, Pipeline::LassoHim, Pipeline::GlmHim]
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown pipeline '{s}'")))
    }
}

/// Consumers of randomness within one replication, in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generate = 0,
    CrossValidate = 1,
}

/// Independent generator for `(seed, replication, consumer)`: the ChaCha key
/// comes from `seed`, the stream id from the other two.
pub fn substream(seed: u64, replication: usize, consumer: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((replication as u64) << 8) | consumer as u64);
    rng
}

/// One pipeline's result for one replication at one `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replication: usize,
    pub kappa: f64,
    pub pipeline: Pipeline,
    /// Metric values in [`Pipeline::metrics`] order, or the error message.
    pub values: std::result::Result<Vec<f64>, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: Model,
    pub kappa: f64,
    pub s_set: String,
    pub pipeline: String,
    pub metric: String,
    /// NaN when every replication failed.
    pub mean: f64,
    pub mc_se: f64,
    pub n_reps: usize,
    pub n_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationTable {
    pub rows: Vec<TableRow>,
    pub outcomes: Vec<ReplicationOutcome>,
}

impl SimulationTable {
    pub fn find(&self, kappa: f64, pipeline: Pipeline, metric: &str) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.kappa == kappa && r.pipeline == pipeline.name() && r.metric == metric)
    }
}

struct Shared {
    report_flagged: Option<Result<Vec<usize>>>,
}

fn him_flags(inst: &GeneratedInstance, spec: &SimulationSpec) -> Result<Vec<usize>> {
    Ok(diagnose(&inst.data, spec.alpha, Estimator::Moment)?.flagged)
}

fn run_pipeline(
    pipeline: Pipeline,
    inst: &GeneratedInstance,
    spec: &SimulationSpec,
    kappa: f64,
    cv_seed: u64,
    shared: &mut Shared,
) -> Result<Vec<f64>> {
    let mut flags = || -> Result<Vec<usize>> {
        shared
            .report_flagged
            .get_or_insert_with(|| him_flags(inst, spec))
            .clone()
    };
    let truth = &inst.true_influential;
    let mut out = Vec::new();
    match pipeline {
        Pipeline::Him => {
            let flagged = flags()?;
            let (power, fdr) = eval_power_fdr(&flagged, truth);
            if kappa != 0.0 {
                out.push(power);
            }
            out.push(fdr);
            out.push(flagged.len() as f64);
        }
        Pipeline::Sis => {
            let s = sis_screen(&inst.data, spec.sis_size())?;
            out.push(eval_cp(&s.selected, &LINEAR_SUPPORT));
        }
        Pipeline::SisHim => {
            let reduced = remove_rows(&inst.data, &flags()?)?;
            let s = sis_screen(&reduced.data, spec.sis_size())?;
            out.push(eval_cp(&s.selected, &LINEAR_SUPPORT));
        }
        Pipeline::Lasso | Pipeline::LassoHim => {
            let data = if pipeline == Pipeline::Lasso {
                inst.data.clone()
            } else {
                remove_rows(&inst.data, &flags()?)?.data
            };
            let fit = lasso_path_cv(&data, spec.n_lambda, spec.cv_folds, cv_seed)?;
            out.push(eval_err(&fit.beta, &inst.beta_true)?);
            out.push(eval_fpr(&support(&fit.beta), &LINEAR_SUPPORT, spec.p));
        }
        Pipeline::GlmHim => {
            let scores = glm_him_scores(&inst.data)?;
            let flagged = rank_influential(&scores.d, spec.n_infl)?;
            let (power, _) = eval_power_fdr(&flagged, truth);
            if kappa != 0.0 {
                out.push(power);
            }
            let full = logistic_lasso_cv(&inst.data, spec.cv_folds, cv_seed)?;
            out.push(misclassification_rate(&full, &inst.data));
            let reduced = remove_rows(&inst.data, &flagged)?.data;
            let redu = logistic_lasso_cv(&reduced, spec.cv_folds, cv_seed)?;
            out.push(misclassification_rate(&redu, &reduced));
        }
    }
    Ok(out)
}

fn replicate(spec: &SimulationSpec, kappas: &[f64], pipelines: &[Pipeline], r: usize) -> Vec<ReplicationOutcome> {
    let base = BaseDraws::draw(spec.n, spec.p, &mut substream(spec.seed, r, Stream::Generate));
    let cv_seed = substream(spec.seed, r, Stream::CrossValidate).next_u64();
    let mut out = Vec::with_capacity(kappas.len() * pipelines.len());
    for &kappa in kappas {
        let inst = generate(spec, kappa, &base);
        let mut shared = Shared { report_flagged: None };
        for &pipeline in pipelines {
            let values = inst
                .as_ref()
                .map_err(|e| e.clone())
                .and_then(|inst| run_pipeline(pipeline, inst, spec, kappa, cv_seed, &mut shared))
                .map_err(|e| e.to_string());
            out.push(ReplicationOutcome { replication: r, kappa, pipeline, values });
        }
    }
    out
}

/// Runs `spec.replications` replications for every `kappa` in the grid and
/// every pipeline, then aggregates means and Monte Carlo standard errors.
///
/// Replication `r` draws its data from `substream(seed, r, Generate)` once and
/// reuses it for the whole `kappa` grid. Cross-validation folds come from
/// `substream(seed, r, CrossValidate)`. Work is spread over the current rayon
/// pool; the output is identical for any pool size.
pub fn run_replications(
    spec: &SimulationSpec,
    kappas: &[f64],
    pipelines: &[Pipeline],
) -> Result<SimulationTable> {
    if spec.replications == 0 {
        return Err(Error::InvalidArgument("at least one replication is required".into()));
    }
    if kappas.is_empty() || pipelines.is_empty() {
        return Err(Error::InvalidArgument("empty kappa grid or pipeline list".into()));
    }
    spec.validate()?;
    for &kappa in kappas {
        let mut s = spec.clone();
        s.kappa = kappa;
        s.validate()?;
    }
    if let Some(bad) = pipelines.iter().find(|p| !p.supports(spec.model)) {
        return Err(Error::InvalidArgument(format!("pipeline {bad} does not apply to model {}", spec.model)));
    }

    let outcomes: Vec<ReplicationOutcome> = (0..spec.replications)
        .into_par_iter()
        .map(|r| replicate(spec, kappas, pipelines, r))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let s_set = match spec.model {
        Model::M2 | Model::M3 => spec.s_set.to_string(),
        _ => "-".to_owned(),
    };
    let mut rows = Vec::new();
    for &kappa in kappas {
        for &pipeline in pipelines {
            let runs: Vec<&ReplicationOutcome> = outcomes
                .iter()
                .filter(|o| o.kappa == kappa && o.pipeline == pipeline)
                .collect();
            let ok: Vec<&Vec<f64>> = runs.iter().filter_map(|o| o.values.as_ref().ok()).collect();
            let n_failures = runs.len() - ok.len();
            for (m, metric) in pipeline.metrics(kappa).into_iter().enumerate() {
                let vals: Vec<f64> = ok.iter().map(|v| v[m]).collect();
                let (mean, mc_se) = mean_and_se(&vals);
                rows.push(TableRow {
                    model: spec.model,
                    kappa,
                    s_set: s_set.clone(),
                    pipeline: pipeline.name().to_owned(),
                    metric: metric.to_owned(),
                    mean,
                    mc_se,
                    n_reps: vals.len(),
                    n_failures,
                });
            }
        }
    }
    Ok(SimulationTable { rows, outcomes })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    match v.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (v[0], 0.0),
        len => {
            let n = len as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        }
    }
}
