use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Model, ShiftSet, SimulationSpec};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::glm::{CanonicalFamily, Logistic};

/// Lag-one correlation of the predictor process.
pub const AR_RHO: f64 = 0.5;
/// Nonzero leading coefficients of the linear models.
pub const LINEAR_BETA: [f64; 5] = [3.0, 1.5, 0.0, 0.0, 2.0];
/// Zero-based support of [`LINEAR_BETA`].
pub const LINEAR_SUPPORT: [usize; 3] = [0, 1, 4];
const SHIFT_PER_KAPPA: f64 = 30.0;
const LOGISTIC_INTERCEPT: f64 = 2.0;
const LOGISTIC_SIGNAL: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMeta {
    pub model: Model,
    pub kappa: f64,
    pub s_set: Option<ShiftSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub data: DataMatrix,
    pub beta_true: Vec<f64>,
    /// The first `n_infl` rows.
    pub true_influential: Vec<usize>,
    pub truth_meta: TruthMeta,
}

/// One stationary AR(1) row: `x_1 ~ N(0,1)`,
/// `x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j`, so `cov(x_j, x_l) = rho^|j-l|`.
pub fn sample_ar1_row<R: Rng + ?Sized>(p: usize, rho: f64, rng: &mut R) -> Vec<f64> {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut row = Vec::with_capacity(p);
    let mut prev = 0.0;
    for j in 0..p {
        let z: f64 = rng.sample(StandardNormal);
        prev = if j == 0 { z } else { rho * prev + innovation * z };
        row.push(prev);
    }
    row
}

/// All randomness of one replication, drawn before any contamination is
/// applied so every `kappa` sees the same underlying sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDraws {
    pub n: usize,
    pub p: usize,
    /// Row-major `n x p`.
    pub x: Vec<f64>,
    pub noise: Vec<f64>,
    pub uniforms: Vec<f64>,
}

impl BaseDraws {
    /// Draw order: predictor rows, then `n` normal errors, then `n`
    /// uniforms.
    pub fn draw<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Self {
        let mut x = Vec::with_capacity(n * p);
        for _ in 0..n {
            x.extend(sample_ar1_row(p, AR_RHO, rng));
        }
        let noise = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let uniforms = (0..n).map(|_| rng.random::<f64>()).collect();
        Self { n, p, x, noise, uniforms }
    }
}

fn linear_beta(p: usize) -> Vec<f64> {
    let mut beta = vec![0.0; p];
    beta[..LINEAR_BETA.len()].copy_from_slice(&LINEAR_BETA);
    beta
}

/// `gamma_j = 1` off the true support.
fn perturbation_direction(p: usize) -> Vec<f64> {
    (0..p).map(|j| if LINEAR_SUPPORT.contains(&j) { 0.0 } else { 1.0 }).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Applies the model's contamination at strength `kappa` to `base`.
pub fn generate(spec: &SimulationSpec, kappa: f64, base: &BaseDraws) -> Result<GeneratedInstance> {
    let mut spec = spec.clone();
    spec.kappa = kappa;
    spec.validate()?;
    if base.n != spec.n || base.p != spec.p {
        return Err(Error::DimensionError(format!(
            "base draws are {} x {}, spec wants {} x {}",
            base.n, base.p, spec.n, spec.p
        )));
    }
    let (n, p, m) = (spec.n, spec.p, spec.n_infl);

    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| base.x[i * p..(i + 1) * p].to_vec()).collect();
    let mut y = vec![0.0; n];
    let beta_true;
    let mut s_set = None;

    match spec.model {
        Model::M1 | Model::M2 | Model::M3 => {
            beta_true = linear_beta(p);
            let gamma = perturbation_direction(p);
            for i in 0..n {
                y[i] = dot(&rows[i], &beta_true) + base.noise[i];
            }
            if spec.model != Model::M1 {
                s_set = Some(spec.s_set);
                let shift = SHIFT_PER_KAPPA * kappa;
                for row in rows.iter_mut().take(m) {
                    for j in spec.s_set.columns(p) {
                        row[j] += shift;
                    }
                }
            }
            match spec.model {
                // y~ = x'beta + kappa x'gamma + e
                Model::M1 => {
                    for i in 0..m {
                        y[i] += kappa * dot(&rows[i], &gamma);
                    }
                }
                // Responses stay as generated from the unshifted predictors.
                Model::M2 => {}
                // y~ = x~'(beta + kappa gamma) + e
                _ => {
                    for i in 0..m {
                        y[i] = dot(&rows[i], &beta_true) + kappa * dot(&rows[i], &gamma) + base.noise[i];
                    }
                }
            }
        }
        Model::Logistic => {
            let mut beta = vec![0.0; p];
            beta[0] = LOGISTIC_SIGNAL;
            beta[1] = LOGISTIC_SIGNAL;
            let mut beta_infl = beta.clone();
            for b in &mut beta_infl[p - p / 2..] {
                *b = -kappa;
            }
            for i in 0..n {
                let coef = if i < m { &beta_infl } else { &beta };
                let prob = Logistic.mean(LOGISTIC_INTERCEPT + dot(&rows[i], coef));
                y[i] = if base.uniforms[i] < prob { 1.0 } else { 0.0 };
            }
            beta_true = beta;
        }
    }

    let data = DataMatrix::from_rows(&rows, y)?;
    Ok(GeneratedInstance {
        data,
        beta_true,
        true_influential: (0..m).collect(),
        truth_meta: TruthMeta { model: spec.model, kappa, s_set },
    })
}

fn generate_checked<R: Rng + ?Sized>(spec: &SimulationSpec, want: Model, rng: &mut R) -> Result<GeneratedInstance> {
    if spec.model != want {
        return Err(Error::InvalidArgument(format!("spec is for {}, not {want}", spec.model)));
    }
    let base = BaseDraws::draw(spec.n, spec.p, rng);
    generate(spec, spec.kappa, &base)
}

pub fn gen_model1<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    generate_checked(spec, Model::M1, rng)
}

pub fn gen_model2<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    generate_checked(spec, Model::M2, rng)
}

pub fn gen_model3<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    generate_checked(spec, Model::M3, rng)
}

pub fn gen_logistic<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    generate_checked(spec, Model::Logistic, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(model: Model, n: usize, p: usize, kappa: f64) -> SimulationSpec {
        let mut s = SimulationSpec::new(model);
        s.n = n;
        s.p = p;
        s.kappa = kappa;
        s
    }

    #[test]
    fn ar1_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = 100_000;
        let p = 6;
        let mut sum = vec![0.0; p];
        let mut sq = vec![0.0; p];
        let mut lag = vec![0.0; p - 1];
        for _ in 0..rows {
            let r = sample_ar1_row(p, AR_RHO, &mut rng);
            for j in 0..p {
                sum[j] += r[j];
                sq[j] += r[j] * r[j];
            }
            for j in 0..p - 1 {
                lag[j] += r[j] * r[j + 1];
            }
        }
        let nf = rows as f64;
        for j in 0..p {
            let mean = sum[j] / nf;
            assert!(mean.abs() < 0.02);
            assert!((sq[j] / nf - mean * mean - 1.0).abs() < 0.02);
        }
        for l in lag {
            assert!((l / nf - 0.5).abs() < 0.01);
        }
    }

    #[test]
    fn ar1_with_zero_rho_is_white_noise() {
        let mut a = ChaCha8Rng::seed_from_u64(2);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        let row = sample_ar1_row(20, 0.0, &mut a);
        let iid: Vec<f64> = (0..20).map(|_| b.sample(StandardNormal)).collect();
        assert_eq!(row, iid);
    }

    #[test]
    fn zero_kappa_is_clean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = BaseDraws::draw(30, 120, &mut rng);
        let clean = generate(&spec(Model::M1, 30, 120, 0.0), 0.0, &base).unwrap();
        for model in [Model::M2, Model::M3] {
            for s in [ShiftSet::S1, ShiftSet::S2, ShiftSet::S3] {
                let mut sp = spec(model, 30, 120, 0.0);
                sp.s_set = s;
                let inst = generate(&sp, 0.0, &base).unwrap();
                assert_eq!(inst.data, clean.data);
            }
        }
        assert_eq!(clean.true_influential, (0..10).collect::<Vec<_>>());
        let logit = generate(&spec(Model::Logistic, 30, 120, 0.0), 0.0, &base).unwrap();
        let logit_k = generate(&spec(Model::Logistic, 30, 120, 0.0), 0.0, &base).unwrap();
        assert_eq!(logit.data, logit_k.data);
    }

    #[test]
    fn model1_contaminates_only_responses_of_first_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = BaseDraws::draw(40, 50, &mut rng);
        let clean = generate(&spec(Model::M1, 40, 50, 0.0), 0.0, &base).unwrap();
        let dirty = generate(&spec(Model::M1, 40, 50, 1.6), 1.6, &base).unwrap();
        assert_eq!(clean.data.x_raw(), dirty.data.x_raw());
        for i in 0..40 {
            let same = clean.data.y()[i] == dirty.data.y()[i];
            assert_eq!(same, i >= 10);
        }
    }

    #[test]
    fn clean_residual_variance_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = spec(Model::M1, 20_000, 8, 0.0);
        let inst = gen_model1(&sp, &mut rng).unwrap();
        let resid: Vec<f64> = (0..sp.n)
            .map(|i| inst.data.y()[i] - dot(&inst.data.row(i), &inst.beta_true))
            .collect();
        let (_, sd) = crate::stats::column_moments(&resid).unwrap();
        assert!((sd * sd - 1.0).abs() < 0.03);
    }

    #[test]
    fn model2_shifts_selected_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut sp = spec(Model::M2, 2000, 150, 1.6);
        sp.n_infl = 1000;
        sp.s_set = ShiftSet::S2;
        let inst = gen_model2(&sp, &mut rng).unwrap();
        let cols = ShiftSet::S2.columns(150);
        assert_eq!(cols.len(), 101);
        for j in [0, 48, 49, 100, 149] {
            let col = inst.data.column(j);
            let top = col[..1000].iter().sum::<f64>() / 1000.0;
            let rest = col[1000..].iter().sum::<f64>() / 1000.0;
            let expect = if cols.contains(&j) { 48.0 } else { 0.0 };
            assert!((top - rest - expect).abs() < 0.15, "column {j}");
        }
    }

    #[test]
    fn logistic_clean_rows_follow_the_link() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sp = spec(Model::Logistic, 20_000, 10, 0.8);
        let inst = gen_logistic(&sp, &mut rng).unwrap();
        let (mut observed, mut expected) = (0.0, 0.0);
        for i in 10..sp.n {
            observed += inst.data.y()[i];
            expected += Logistic.mean(2.0 + 5.0 * inst.data.get(i, 0) + 5.0 * inst.data.get(i, 1));
        }
        let m = (sp.n - 10) as f64;
        // Bernoulli variance is at most 1/4.
        assert!(((observed - expected) / m).abs() < 4.0 * (0.25 / m).sqrt());
        assert!(gen_logistic(&spec(Model::Logistic, 30, 11, 0.8), &mut rng).is_err());
    }

    #[test]
    fn wrong_model_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(gen_model2(&spec(Model::M1, 30, 20, 0.4), &mut rng).is_err());
    }
}
