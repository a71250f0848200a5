//! Influence on marginal GLM fits.
//!
//! Each predictor gets its own two-parameter fit (intercept plus slope). The
//! score for observation `k` is the mean over predictors of the squared change
//! in `(intercept, slope)` when row `k` is deleted. There is no reference
//! distribution for it; callers flag the largest scores with
//! [`rank_influential`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub const MAX_ITER: usize = 50;
pub const STEP_TOL: f64 = 1e-8;
pub const GRAD_TOL: f64 = 1e-8;
/// Coefficients beyond this magnitude (logit scale) are treated as divergent.
pub const DIVERGENCE_CAP: f64 = 10.0;
const MAX_HALVINGS: usize = 40;

/// A canonical-link exponential family, `f(y; theta) = exp{y theta - b(theta) + c(y)}`.
pub trait CanonicalFamily: Sync {
    /// Cumulant `b(theta)`.
    fn cumulant(&self, theta: f64) -> f64;
    /// Mean `b'(theta)`.
    fn mean(&self, theta: f64) -> f64;
    /// Variance function `b''(theta)`.
    fn variance(&self, theta: f64) -> f64;
    fn check_response(&self, y: &[f64]) -> Result<()>;
}

/// Bernoulli response with the logit link.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

impl CanonicalFamily for Logistic {
    fn cumulant(&self, theta: f64) -> f64 {
        // log(1 + e^theta)
        if theta > 0.0 {
            theta + (-theta).exp().ln_1p()
        } else {
            theta.exp().ln_1p()
        }
    }

    fn mean(&self, theta: f64) -> f64 {
        if theta >= 0.0 {
            1.0 / (1.0 + (-theta).exp())
        } else {
            let e = theta.exp();
            e / (1.0 + e)
        }
    }

    fn variance(&self, theta: f64) -> f64 {
        let m = self.mean(theta);
        m * (1.0 - m)
    }

    fn check_response(&self, y: &[f64]) -> Result<()> {
        if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!("binary response expected, found {bad}")));
        }
        let ones = y.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == y.len() {
            return Err(Error::DegenerateResponse("only one class present".into()));
        }
        Ok(())
    }
}

/// Outcome of one marginal fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalFit {
    pub beta0: f64,
    pub beta1: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Full-data marginal fits for every predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalGlmFit {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmInfluenceScores {
    pub d: Vec<f64>,
    /// Predictors whose full-data fit did not converge; they are left out of
    /// every score.
    pub failed_predictors: Vec<usize>,
    /// `(k, j)` pairs whose leave-one-out refit did not converge.
    pub fit_failures: Vec<(usize, usize)>,
    pub fits: MarginalGlmFit,
}

/// Mean log-likelihood, score and the 2x2 information of `theta = b0 + b1 x`,
/// ignoring row `skip`.
fn evaluate<F: CanonicalFamily>(
    family: &F,
    x: &[f64],
    y: &[f64],
    skip: Option<usize>,
    b0: f64,
    b1: f64,
) -> (f64, [f64; 2], [f64; 3]) {
    let mut ll = 0.0;
    let mut g = [0.0; 2];
    let mut h = [0.0; 3];
    let mut m = 0usize;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        if Some(i) == skip {
            continue;
        }
        let theta = b0 + b1 * xi;
        ll += yi * theta - family.cumulant(theta);
        let r = yi - family.mean(theta);
        let w = family.variance(theta);
        g[0] += r;
        g[1] += r * xi;
        h[0] += w;
        h[1] += w * xi;
        h[2] += w * xi * xi;
        m += 1;
    }
    let mf = m as f64;
    (ll / mf, [g[0] / mf, g[1] / mf], [h[0] / mf, h[1] / mf, h[2] / mf])
}

fn newton<F: CanonicalFamily>(
    family: &F,
    x: &[f64],
    y: &[f64],
    skip: Option<usize>,
    start: (f64, f64),
    mut trace: Option<&mut Vec<f64>>,
) -> MarginalFit {
    let (mut b0, mut b1) = start;
    let (mut ll, mut g, mut h) = evaluate(family, x, y, skip, b0, b1);
    if let Some(t) = trace.as_deref_mut() {
        t.push(ll);
    }
    for iter in 1..=MAX_ITER {
        let det = h[0] * h[2] - h[1] * h[1];
        if !(det > 0.0) {
            return MarginalFit { beta0: b0, beta1: b1, converged: false, iterations: iter };
        }
        let d0 = (h[2] * g[0] - h[1] * g[1]) / det;
        let d1 = (h[0] * g[1] - h[1] * g[0]) / det;

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let (c0, c1) = (b0 + step * d0, b1 + step * d1);
            let eval = evaluate(family, x, y, skip, c0, c1);
            if eval.0 >= ll || (eval.0 - ll).abs() <= 1e-15 * ll.abs().max(1.0) {
                accepted = Some((c0, c1, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((c0, c1, eval)) = accepted else {
            let converged = g[0].hypot(g[1]) <= GRAD_TOL;
            return MarginalFit { beta0: b0, beta1: b1, converged, iterations: iter };
        };
        let change = (c0 - b0).abs().max((c1 - b1).abs());
        (b0, b1) = (c0, c1);
        (ll, g, h) = eval;
        if let Some(t) = trace.as_deref_mut() {
            t.push(ll);
        }
        if b0.abs() > DIVERGENCE_CAP || b1.abs() > DIVERGENCE_CAP {
            return MarginalFit { beta0: b0, beta1: b1, converged: false, iterations: iter };
        }
        if change <= STEP_TOL && g[0].hypot(g[1]) <= GRAD_TOL {
            return MarginalFit { beta0: b0, beta1: b1, converged: true, iterations: iter };
        }
    }
    MarginalFit { beta0: b0, beta1: b1, converged: false, iterations: MAX_ITER }
}

fn cold_start(y: &[f64], skip: Option<usize>) -> (f64, f64) {
    let (mut s, mut m) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        if Some(i) != skip {
            s += v;
            m += 1.0;
        }
    }
    let mean = s / m;
    ((mean / (1.0 - mean)).ln(), 0.0)
}

/// Maximum-likelihood logistic fit of `y` on an intercept and `x` by Newton's
/// method with step halving. Stops when the largest coefficient change is at
/// most `1e-8` (and the score has vanished), after 50 iterations, or when a
/// coefficient leaves `[-10, 10]`, which signals separation.
pub fn fit_marginal_logistic(x: &[f64], y: &[f64]) -> Result<MarginalFit> {
    fit_marginal(&Logistic, x, y)
}

pub fn fit_marginal<F: CanonicalFamily>(family: &F, x: &[f64], y: &[f64]) -> Result<MarginalFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionError(format!(
            "predictor has length {}, response {}",
            x.len(),
            y.len()
        )));
    }
    family.check_response(y)?;
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateScale { column: 0, observation: None });
    }
    Ok(newton(family, x, y, None, cold_start(y, None), None))
}

pub fn fit_all_marginals(data: &DataMatrix) -> Result<MarginalGlmFit> {
    Logistic.check_response(data.y())?;
    let fits = data
        .columns()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(j, col)| {
            fit_marginal(&Logistic, col, data.y()).map_err(|e| match e {
                Error::DegenerateScale { .. } => Error::DegenerateScale { column: j, observation: None },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginalGlmFit {
        beta0: fits.iter().map(|f| f.beta0).collect(),
        beta1: fits.iter().map(|f| f.beta1).collect(),
        converged: fits.iter().map(|f| f.converged).collect(),
        iterations: fits.iter().map(|f| f.iterations).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmStart {
    FromFullFit,
    Cold,
}

/// Leave-one-out influence on the marginal logistic fits. Pairs `(k, j)`
/// where a fit fails are dropped from observation `k`'s average and
/// recorded.
pub fn glm_him_scores(data: &DataMatrix) -> Result<GlmInfluenceScores> {
    glm_him_scores_with(data, WarmStart::FromFullFit)
}

pub fn glm_him_scores_with(data: &DataMatrix, start: WarmStart) -> Result<GlmInfluenceScores> {
    let fits = fit_all_marginals(data)?;
    let usable: Vec<usize> = (0..data.p()).filter(|&j| fits.converged[j]).collect();
    if usable.is_empty() {
        return Err(Error::FitFailure("no marginal fit converged on the full data".into()));
    }
    let failed_predictors = (0..data.p()).filter(|&j| !fits.converged[j]).collect();
    let y = data.y();

    let rows: Vec<(f64, Vec<(usize, usize)>)> = (0..data.n())
        .into_par_iter()
        .map(|k| {
            let mut acc = 0.0;
            let mut used = 0usize;
            let mut failures = Vec::new();
            for &j in &usable {
                let x = data.column(j);
                let init = match start {
                    WarmStart::FromFullFit => (fits.beta0[j], fits.beta1[j]),
                    WarmStart::Cold => cold_start(y, Some(k)),
                };
                let f = newton(&Logistic, x, y, Some(k), init, None);
                if f.converged {
                    acc += (f.beta0 - fits.beta0[j]).powi(2) + (f.beta1 - fits.beta1[j]).powi(2);
                    used += 1;
                } else {
                    failures.push((k, j));
                }
            }
            let d = if used > 0 { acc / used as f64 } else { 0.0 };
            (d, failures)
        })
        .collect();

    let mut d = Vec::with_capacity(rows.len());
    let mut fit_failures = Vec::new();
    for (score, failures) in rows {
        d.push(score);
        fit_failures.extend(failures);
    }
    Ok(GlmInfluenceScores { d, failed_predictors, fit_failures, fits })
}

/// The `m` observations with the largest scores (lower index wins ties),
/// returned in increasing index order.
pub fn rank_influential(scores: &[f64], m: usize) -> Result<Vec<usize>> {
    let n = scores.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("cannot flag {m} of {n} observations")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top = order[..m].to_vec();
    top.sort_unstable();
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn logistic_sample(rng: &mut impl Rng, n: usize, b0: f64, b1: f64) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y = x
            .iter()
            .map(|&v| {
                let pr = Logistic.mean(b0 + b1 * v);
                if rng.random::<f64>() < pr { 1.0 } else { 0.0 }
            })
            .collect();
        (x, y)
    }

    /// Score equations solved by nested bisection: for a slope, the intercept
    /// equation is monotone; the profiled slope equation is monotone too.
    fn bisection_mle(x: &[f64], y: &[f64]) -> (f64, f64) {
        let intercept_for = |b1: f64| {
            let (mut lo, mut hi) = (-20.0, 20.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s: f64 = x.iter().zip(y).map(|(&xi, &yi)| yi - Logistic.mean(mid + b1 * xi)).sum();
                if s > 0.0 { lo = mid } else { hi = mid }
            }
            0.5 * (lo + hi)
        };
        let (mut lo, mut hi) = (-20.0, 20.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let b0 = intercept_for(mid);
            let s: f64 = x
                .iter()
                .zip(y)
                .map(|(&xi, &yi)| (yi - Logistic.mean(b0 + mid * xi)) * xi)
                .sum();
            if s > 0.0 { lo = mid } else { hi = mid }
        }
        let b1 = 0.5 * (lo + hi);
        (intercept_for(b1), b1)
    }

    #[test]
    fn matches_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (x, y) = logistic_sample(&mut rng, 200, 0.5, 1.0);
        let fit = fit_marginal_logistic(&x, &y).unwrap();
        let (o0, o1) = bisection_mle(&x, &y);
        assert!(fit.converged);
        assert!((fit.beta0 - o0).abs() <= 1e-6 && (fit.beta1 - o1).abs() <= 1e-6);
        let (_, g, _) = evaluate(&Logistic, &x, &y, None, fit.beta0, fit.beta1);
        assert!(g[0].hypot(g[1]) <= GRAD_TOL);
    }

    #[test]
    fn null_slope_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (x, y) = logistic_sample(&mut rng, 2000, 0.0, 0.0);
        let fit = fit_marginal_logistic(&x, &y).unwrap();
        assert!(fit.converged);
        assert!(fit.beta1.abs() <= 0.1 && fit.beta0.abs() <= 0.15);
    }

    #[test]
    fn separation_hits_the_cap() {
        let fit = fit_marginal_logistic(&[-1.0, -1.0, 1.0, 1.0], &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(!fit.converged);
        assert!(fit.beta1.abs() > DIVERGENCE_CAP || fit.beta0.abs() > DIVERGENCE_CAP);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            fit_marginal_logistic(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]),
            Err(Error::DegenerateResponse(_))
        ));
        assert!(matches!(
            fit_marginal_logistic(&[2.0, 2.0, 2.0], &[0.0, 1.0, 1.0]),
            Err(Error::DegenerateScale { .. })
        ));
        assert!(matches!(
            fit_marginal_logistic(&[1.0, 2.0, 3.0], &[0.0, 0.5, 1.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn likelihood_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (x, y) = logistic_sample(&mut rng, 60, 1.5, -2.0);
            let mut trace = Vec::new();
            newton(&Logistic, &x, &y, None, (3.0, 4.0), Some(&mut trace));
            assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs()));
        }
    }

    fn logistic_data(rng: &mut impl Rng, n: usize, p: usize) -> DataMatrix {
        let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let y = (0..n)
            .map(|i| {
                let pr = Logistic.mean(0.3 + x[i] - 0.5 * x[n + i]);
                if rng.random::<f64>() < pr { 1.0 } else { 0.0 }
            })
            .collect();
        DataMatrix::from_columns(n, p, x, y).unwrap()
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let data = logistic_data(&mut rng, 20, 3);
        let warm = glm_him_scores_with(&data, WarmStart::FromFullFit).unwrap();
        let cold = glm_him_scores_with(&data, WarmStart::Cold).unwrap();
        assert_eq!(warm.fit_failures, cold.fit_failures);
        for (a, b) in warm.d.iter().zip(&cold.d) {
            assert!((a - b).abs() <= 1e-8);
            assert!(*a >= 0.0);
        }
    }

    #[test]
    fn label_flip_leaves_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = logistic_data(&mut rng, 40, 4);
        let flipped = data.with_response(data.y().iter().map(|v| 1.0 - v).collect()).unwrap();
        let a = glm_him_scores(&data).unwrap();
        let b = glm_him_scores(&flipped).unwrap();
        for (u, v) in a.d.iter().zip(&b.d) {
            assert!((u - v).abs() <= 1e-8);
        }
        for j in 0..4 {
            assert!((a.fits.beta1[j] + b.fits.beta1[j]).abs() <= 1e-8);
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_influential(&[0.1, 0.5, 0.5, 0.2], 2).unwrap(), vec![1, 2]);
        assert_eq!(rank_influential(&[0.3, 0.1, 0.2], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(rank_influential(&[0.3, 0.3, 0.3], 1).unwrap(), vec![0]);
        assert!(matches!(rank_influential(&[0.1], 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(rank_influential(&[0.1], 2), Err(Error::InvalidArgument(_))));
    }
}
