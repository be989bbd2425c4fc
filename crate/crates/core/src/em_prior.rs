//! Empirical prior for sparse, irregular observations, estimated with EM.
//!
//! Latent values `u_i` on a reference grid `Z` are shared across tasks:
//! `u_i ~ N(mu, Sigma)` and `y_i | u_i ~ N(W_i u_i, noise_var I)` with
//! kernel interpolation weights `W_i = k(X_i, Z) k(Z, Z)^{-1}`. Both EM
//! steps are closed form. After fitting, the learned moments are extended to
//! arbitrary inputs by interpolating their residuals against a base GP:
//!
//! ```text
//! mean(x)    = base_mean(x) + W_x (mu - base_mean(Z))
//! cov(x, x') = k(x, x') + W_x (Sigma - k(Z, Z)) W_x'^T
//! ```
//!
//! which reproduces `(mu, Sigma)` on `Z` and reverts to the base GP where
//! the weights vanish.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel_matrix, kernel_matrix, KernelSpec, MeanSpec};
use crate::numerics::{psd_sqrt, robust_cholesky, solve_psd, symmetrize, CholeskyFactor};

pub const EM_FORMAT_VERSION: u32 = 1;

const LN_2PI: f64 = 1.8378770664093453;
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once both the mean step (L2) and covariance step (Frobenius)
    /// fall below this.
    pub tol: f64,
    pub noise_var: f64,
    pub estimate_noise: bool,
    /// Base jitter for factorizing `k(Z, Z)`.
    pub jitter: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            noise_var: 1e-4,
            estimate_noise: false,
            jitter: 1e-10,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.tol > 0.0) || !(self.noise_var > 0.0) || self.jitter < 0.0 {
            return Err(Error::InvalidSpec(format!("invalid EM configuration {self:?}")));
        }
        Ok(())
    }
}

/// Computes interpolation weights `k(X, Z) k(Z, Z)^{-1}` against a fixed grid.
#[derive(Clone, Debug)]
pub struct GridInterpolator {
    kernel: KernelSpec,
    grid: Vec<f64>,
    factor: CholeskyFactor,
}

impl GridInterpolator {
    pub fn new(kernel: &KernelSpec, grid: &[f64], jitter: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let kzz = kernel_matrix(kernel, grid)?;
        let factor = robust_cholesky(&kzz, jitter)?;
        Ok(Self {
            kernel: *kernel,
            grid: grid.to_vec(),
            factor,
        })
    }

    pub fn jitter_used(&self) -> f64 {
        self.factor.jitter_used
    }

    /// `N x M` weights for the inputs `xs`.
    pub fn weights(&self, xs: &[f64]) -> Result<DMatrix<f64>> {
        let kzx = cross_kernel_matrix(&self.kernel, &self.grid, xs)?;
        Ok(solve_psd(&self.factor, &kzx)?.transpose())
    }
}

pub fn interp_weights(base_kernel: &KernelSpec, xs: &[f64], grid: &[f64], jitter: f64) -> Result<DMatrix<f64>> {
    GridInterpolator::new(base_kernel, grid, jitter)?.weights(xs)
}

/// Observations of one task, already projected onto the grid.
#[derive(Clone, Debug)]
pub struct Task {
    /// `N_i x M`
    pub w: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Task {
    pub fn new(w: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if w.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "weights have {} rows, observations {}",
                w.nrows(),
                y.len()
            )));
        }
        Ok(Self { w, y })
    }
}

#[derive(Clone, Debug)]
pub struct EStepResult {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// Observed-data log-likelihood summed over tasks.
    pub loglik: f64,
}

/// How to invert the `N_i x N_i` predictive covariance in the E-step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolvePath {
    /// Woodbury when `N_i > M`, direct otherwise.
    #[default]
    Auto,
    Direct,
    Woodbury,
}

struct TaskPosterior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    loglik: f64,
}

fn condition_direct(mu: &DVector<f64>, sigma: &DMatrix<f64>, noise_var: f64, task: &Task) -> Result<TaskPosterior> {
    let n = task.y.len();
    let r = &task.y - &task.w * mu;
    // Sigma_{X,Z} = W Sigma
    let sxz = &task.w * sigma;
    let mut sxx = &sxz * task.w.transpose();
    symmetrize(&mut sxx);
    for d in 0..n {
        sxx[(d, d)] += noise_var;
    }
    let factor = robust_cholesky(&sxx, 0.0)?;
    let v = factor.solve_lower(&sxz)?;
    let a = factor.solve_lower_vec(&r)?;
    let mean = mu + v.transpose() * &a;
    let mut cov = sigma - v.transpose() * &v;
    symmetrize(&mut cov);
    let loglik = -0.5 * (a.norm_squared() + factor.log_det() + n as f64 * LN_2PI);
    Ok(TaskPosterior { mean, cov, loglik })
}

/// Woodbury form with `Sigma = F F^T`: with `U = W F` and
/// `B = noise_var I + U^T U`, the posterior is `m = mu + F B^{-1} U^T r`,
/// `C = noise_var F B^{-1} F^T`, and only `M x M` systems are solved.
fn condition_woodbury(
    mu: &DVector<f64>,
    sigma_sqrt: &DMatrix<f64>,
    noise_var: f64,
    task: &Task,
) -> Result<TaskPosterior> {
    let n = task.y.len();
    let m = mu.len();
    let r = &task.y - &task.w * mu;
    let u = &task.w * sigma_sqrt;
    let mut b = u.transpose() * &u;
    symmetrize(&mut b);
    for d in 0..m {
        b[(d, d)] += noise_var;
    }
    let factor = robust_cholesky(&b, 0.0)?;
    let proj = u.transpose() * &r;
    let half = factor.solve_lower_vec(&proj)?;
    let mean = mu + sigma_sqrt * factor.solve_vec(&proj)?;
    let q = factor.solve_lower(&sigma_sqrt.transpose())?;
    let mut cov = q.transpose() * &q * noise_var;
    symmetrize(&mut cov);
    let quad = (r.norm_squared() - half.norm_squared()) / noise_var;
    let log_det = (n as f64 - m as f64) * noise_var.ln() + factor.log_det();
    let loglik = -0.5 * (quad + log_det + n as f64 * LN_2PI);
    Ok(TaskPosterior { mean, cov, loglik })
}

/// Posterior moments of every task's latent grid values.
pub fn e_step(
    prior_mu: &DVector<f64>,
    prior_sigma: &DMatrix<f64>,
    noise_var: f64,
    tasks: &[Task],
) -> Result<EStepResult> {
    e_step_with(prior_mu, prior_sigma, noise_var, tasks, SolvePath::Auto)
}

pub fn e_step_with(
    prior_mu: &DVector<f64>,
    prior_sigma: &DMatrix<f64>,
    noise_var: f64,
    tasks: &[Task],
    path: SolvePath,
) -> Result<EStepResult> {
    let m = prior_mu.len();
    if prior_sigma.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "mean has {m} entries, covariance is {:?}",
            prior_sigma.shape()
        )));
    }
    if !(noise_var > 0.0) {
        return Err(Error::InvalidSpec(format!("noise variance must be positive, got {noise_var}")));
    }
    if let Some(t) = tasks.iter().find(|t| t.w.ncols() != m || t.w.nrows() != t.y.len()) {
        return Err(Error::DimensionMismatch(format!(
            "task weights are {:?} for {} observations on a grid of {m}",
            t.w.shape(),
            t.y.len()
        )));
    }
    let use_woodbury = |t: &Task| match path {
        SolvePath::Auto => t.y.len() > m,
        SolvePath::Direct => false,
        SolvePath::Woodbury => true,
    };
    let sigma_sqrt = tasks
        .iter()
        .any(|t| !t.y.is_empty() && use_woodbury(t))
        .then(|| psd_sqrt(prior_sigma));

    let posteriors: Vec<TaskPosterior> = tasks
        .par_iter()
        .map(|t| {
            if t.y.is_empty() {
                Ok(TaskPosterior {
                    mean: prior_mu.clone(),
                    cov: prior_sigma.clone(),
                    loglik: 0.0,
                })
            } else if use_woodbury(t) {
                condition_woodbury(prior_mu, sigma_sqrt.as_ref().expect("computed above"), noise_var, t)
            } else {
                condition_direct(prior_mu, prior_sigma, noise_var, t)
            }
        })
        .collect::<Result<_>>()?;

    let mut out = EStepResult {
        means: Vec::with_capacity(posteriors.len()),
        covs: Vec::with_capacity(posteriors.len()),
        loglik: 0.0,
    };
    for p in posteriors {
        out.loglik += p.loglik;
        out.means.push(p.mean);
        out.covs.push(p.cov);
    }
    Ok(out)
}

/// Sum in a fixed pairwise tree so the result does not depend on scheduling.
fn pairwise_sum(items: &[DMatrix<f64>]) -> DMatrix<f64> {
    match items.len() {
        0 => panic!("pairwise_sum of nothing"),
        1 => items[0].clone(),
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `mu = mean(m_i)`, `Sigma = mean(C_i + (m_i - mu)(m_i - mu)^T)`.
pub fn m_step(e: &EStepResult) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = e.means.len();
    if k == 0 {
        return Err(Error::EmptyCorpus);
    }
    let m = e.means[0].len();
    let mut mu = DVector::zeros(m);
    for mi in &e.means {
        mu += mi;
    }
    mu /= k as f64;
    let centered = DMatrix::from_fn(k, m, |i, j| e.means[i][j] - mu[j]);
    let mut sigma = pairwise_sum(&e.covs) + centered.transpose() * &centered;
    sigma /= k as f64;
    symmetrize(&mut sigma);
    Ok((mu, sigma))
}

/// Closed-form noise update
/// `sum_i ||y_i - W_i m_i||^2 + tr(W_i C_i W_i^T)` over the total number of
/// observations, floored at `1e-12`.
pub fn estimate_noise_update(e: &EStepResult, tasks: &[Task]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for ((t, m), c) in tasks.iter().zip(&e.means).zip(&e.covs) {
        if t.y.is_empty() {
            continue;
        }
        let resid = &t.y - &t.w * m;
        let wc = &t.w * c;
        let trace: f64 = wc.component_mul(&t.w).sum();
        total += resid.norm_squared() + trace;
        count += t.y.len();
    }
    if count == 0 {
        return NOISE_FLOOR;
    }
    (total / count as f64).max(NOISE_FLOOR)
}

/// Per-iteration diagnostics of [`fit_em`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmIteration {
    pub iteration: usize,
    /// Log-likelihood under the parameters entering this iteration.
    pub loglik: f64,
    pub mean_step: f64,
    pub cov_step: f64,
    /// Noise variance after this iteration.
    pub noise_var: f64,
}

#[derive(Clone, Debug)]
pub struct EmPrior {
    pub grid: Vec<f64>,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub noise_var: f64,
    pub base_kernel: KernelSpec,
    pub base_mean: MeanSpec,
    pub delta_mu: DVector<f64>,
    pub delta_sigma: DMatrix<f64>,
    pub iterations_run: usize,
    /// `(mean step, covariance step)` of the last iteration.
    pub final_step_norms: (f64, f64),
    pub jitter: f64,
    pub history: Vec<EmIteration>,
    interpolator: GridInterpolator,
}

/// Builds one task per path of `corpus`.
pub fn corpus_tasks(corpus: &Corpus, interpolator: &GridInterpolator) -> Result<Vec<Task>> {
    corpus
        .paths
        .iter()
        .map(|p| Task::new(interpolator.weights(&p.xs)?, DVector::from_column_slice(&p.ys)))
        .collect()
}

/// Runs EM from the base model (`mu = base_mean(Z)`, `Sigma = k(Z, Z)`).
pub fn fit_em(
    corpus: &Corpus,
    grid: &[f64],
    base_kernel: &KernelSpec,
    base_mean: &MeanSpec,
    cfg: &EmConfig,
) -> Result<EmPrior> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    cfg.validate()?;
    let interpolator = GridInterpolator::new(base_kernel, grid, cfg.jitter)?;
    let tasks = corpus_tasks(corpus, &interpolator)?;
    fit_em_tasks(&tasks, interpolator, base_mean, cfg)
}

/// [`fit_em`] on pre-built tasks.
pub fn fit_em_tasks(
    tasks: &[Task],
    interpolator: GridInterpolator,
    base_mean: &MeanSpec,
    cfg: &EmConfig,
) -> Result<EmPrior> {
    if tasks.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    cfg.validate()?;
    let grid = interpolator.grid.clone();
    let base_kernel = interpolator.kernel;
    let mut mu = base_mean.eval_many(&grid);
    let mut sigma = kernel_matrix(&base_kernel, &grid)?;
    let mut noise_var = cfg.noise_var;
    let mut history = Vec::new();
    let mut steps = (f64::INFINITY, f64::INFINITY);

    for iteration in 1..=cfg.max_iters {
        let e = e_step(&mu, &sigma, noise_var, tasks)?;
        let (new_mu, new_sigma) = m_step(&e)?;
        if cfg.estimate_noise {
            noise_var = estimate_noise_update(&e, tasks);
        }
        steps = ((&new_mu - &mu).norm(), (&new_sigma - &sigma).norm());
        history.push(EmIteration {
            iteration,
            loglik: e.loglik,
            mean_step: steps.0,
            cov_step: steps.1,
            noise_var,
        });
        mu = new_mu;
        sigma = new_sigma;
        if steps.0.max(steps.1) < cfg.tol {
            break;
        }
    }

    let mut prior = EmPrior::assemble(grid, mu, sigma, noise_var, base_mean, interpolator, cfg.jitter)?;
    prior.iterations_run = history.len();
    prior.final_step_norms = steps;
    prior.history = history;
    Ok(prior)
}

impl EmPrior {
    fn assemble(
        grid: Vec<f64>,
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
        noise_var: f64,
        base_mean: &MeanSpec,
        interpolator: GridInterpolator,
        jitter: f64,
    ) -> Result<Self> {
        let base_kernel = interpolator.kernel;
        let delta_mu = &mu - base_mean.eval_many(&grid);
        let delta_sigma = &sigma - kernel_matrix(&base_kernel, &grid)?;
        Ok(Self {
            grid,
            mu,
            sigma,
            noise_var,
            base_kernel,
            base_mean: *base_mean,
            delta_mu,
            delta_sigma,
            iterations_run: 0,
            final_step_norms: (0.0, 0.0),
            jitter,
            history: Vec::new(),
            interpolator,
        })
    }

    pub fn interpolator(&self) -> &GridInterpolator {
        &self.interpolator
    }

    pub fn prior_mean(&self, query: &[f64]) -> Result<DVector<f64>> {
        let w = self.interpolator.weights(query)?;
        Ok(self.base_mean.eval_many(query) + w * &self.delta_mu)
    }

    /// Residual-interpolated covariance between two query sets.
    ///
    /// Evaluated as `(k_qq' - V_q^T V_q') + W_q (Sigma + jI) W_q'^T` with
    /// `V = L^{-1} k(Z, q)`, which equals `k + W delta_Sigma W^T` for the
    /// jittered weights and keeps the diagonal blocks PSD.
    pub fn prior_cov(&self, qa: &[f64], qb: &[f64]) -> Result<DMatrix<f64>> {
        let kab = cross_kernel_matrix(&self.base_kernel, qa, qb)?;
        let za = cross_kernel_matrix(&self.base_kernel, &self.grid, qa)?;
        let va = self.interpolator.factor.solve_lower(&za)?;
        let wa = self.interpolator.factor.lower.tr_solve_lower_triangular(&va).expect("positive diagonal").transpose();
        let mut inner = self.sigma.clone();
        let j = self.interpolator.factor.jitter_used;
        for d in 0..inner.nrows() {
            inner[(d, d)] += j;
        }
        let same = qa == qb;
        let (vb, wb) = if same {
            (va.clone(), wa.clone())
        } else {
            let zb = cross_kernel_matrix(&self.base_kernel, &self.grid, qb)?;
            let vb = self.interpolator.factor.solve_lower(&zb)?;
            let wb = self.interpolator.factor.lower.tr_solve_lower_triangular(&vb).expect("positive diagonal").transpose();
            (vb, wb)
        };
        let mut cov = kab - va.transpose() * &vb + &wa * inner * wb.transpose();
        if same {
            symmetrize(&mut cov);
        }
        Ok(cov)
    }

    /// Mean and covariance of the learned prior at `query`.
    pub fn moments(&self, query: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.prior_mean(query)?, self.prior_cov(query, query)?))
    }

    pub fn to_json(&self) -> Result<String> {
        let m = self.grid.len();
        let file = EmFile {
            version: EM_FORMAT_VERSION,
            kind: "em".into(),
            grid: self.grid.clone(),
            mu: self.mu.iter().copied().collect(),
            sigma: (0..m * m).map(|idx| self.sigma[(idx / m, idx % m)]).collect(),
            noise_var: self.noise_var,
            base_kernel: self.base_kernel,
            base_mean: self.base_mean,
            iterations_run: self.iterations_run,
            final_step_norms: Some([self.final_step_norms.0, self.final_step_norms.1]),
            jitter: Some(self.jitter),
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Loads a prior written by [`EmPrior::to_json`]; the residuals are
    /// recomputed from the stored moments.
    pub fn from_json(s: &str) -> Result<Self> {
        let f: EmFile = serde_json::from_str(s)?;
        if f.version != EM_FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(format!("EM prior version {}", f.version)));
        }
        let m = f.grid.len();
        if f.mu.len() != m || f.sigma.len() != m * m {
            return Err(Error::DimensionMismatch(format!(
                "EM prior grid has {m} points, mu {} and sigma {} entries",
                f.mu.len(),
                f.sigma.len()
            )));
        }
        if !(f.noise_var > 0.0) {
            return Err(Error::InvalidSpec("noise_var must be positive".into()));
        }
        let jitter = f.jitter.unwrap_or(EmConfig::default().jitter);
        let interpolator = GridInterpolator::new(&f.base_kernel, &f.grid, jitter)?;
        let sigma = DMatrix::from_row_slice(m, m, &f.sigma);
        let mut prior = EmPrior::assemble(
            f.grid,
            DVector::from_vec(f.mu),
            sigma,
            f.noise_var,
            &f.base_mean,
            interpolator,
            jitter,
        )?;
        prior.iterations_run = f.iterations_run;
        if let Some([a, b]) = f.final_step_norms {
            prior.final_step_norms = (a, b);
        }
        Ok(prior)
    }
}

/// Residual-interpolated moments at `query`.
pub fn em_prior_moments(prior: &EmPrior, query: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    prior.moments(query)
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct EmFile {
    pub version: u32,
    #[serde(default)]
    pub kind: String,
    pub grid: Vec<f64>,
    pub mu: Vec<f64>,
    /// Row-major `M x M`.
    pub sigma: Vec<f64>,
    pub noise_var: f64,
    pub base_kernel: KernelSpec,
    pub base_mean: MeanSpec,
    pub iterations_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_step_norms: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}
