//! GP conditioning and sampling under any of the supported priors.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::em_prior::EmPrior;
use crate::empirical_prior::DensePrior;
use crate::error::{Error, Result};
use crate::kernels::{cross_kernel_matrix, kernel_matrix, KernelSpec, MeanSpec};
use crate::numerics::{psd_sqrt, robust_cholesky, symmetrize};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    Dense,
    Em,
    Parametric,
}

/// A GP prior: learned (dense or EM) or a parametric baseline.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Prior {
    Dense(DensePrior),
    Em(EmPrior),
    Parametric { kernel: KernelSpec, mean: MeanSpec },
}

#[derive(Serialize, Deserialize)]
struct ParametricFile {
    kind: String,
    kernel: KernelSpec,
    mean: MeanSpec,
}

impl Prior {
    pub fn kind(&self) -> PriorKind {
        match self {
            Prior::Dense(_) => PriorKind::Dense,
            Prior::Em(_) => PriorKind::Em,
            Prior::Parametric { .. } => PriorKind::Parametric,
        }
    }

    pub fn mean(&self, query: &[f64]) -> Result<DVector<f64>> {
        match self {
            Prior::Dense(p) => Ok(p.prior_mean(query)),
            Prior::Em(p) => p.prior_mean(query),
            Prior::Parametric { mean, .. } => Ok(mean.eval_many(query)),
        }
    }

    pub fn cov(&self, qa: &[f64], qb: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Prior::Dense(p) => Ok(p.prior_cov(qa, qb)),
            Prior::Em(p) => p.prior_cov(qa, qb),
            Prior::Parametric { kernel, .. } if qa == qb => kernel_matrix(kernel, qa),
            Prior::Parametric { kernel, .. } => cross_kernel_matrix(kernel, qa, qb),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        match self {
            Prior::Dense(p) => p.to_json(),
            Prior::Em(p) => p.to_json(),
            Prior::Parametric { kernel, mean } => Ok(serde_json::to_string(&ParametricFile {
                kind: "parametric".into(),
                kernel: *kernel,
                mean: *mean,
            })?),
        }
    }

    /// Reads any prior file, dispatching on `"kind"` (or, failing that, on
    /// which fields are present).
    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let kind = v.get("kind").and_then(|k| k.as_str()).map(str::to_owned);
        match kind.as_deref() {
            Some("dense") => Ok(Prior::Dense(DensePrior::from_json(s)?)),
            Some("em") => Ok(Prior::Em(EmPrior::from_json(s)?)),
            Some("parametric") => {
                let f: ParametricFile = serde_json::from_value(v)?;
                f.kernel.validate()?;
                Ok(Prior::Parametric { kernel: f.kernel, mean: f.mean })
            }
            Some(other) => Err(Error::UnsupportedFormat(format!("prior kind {other:?}"))),
            None if v.get("basis").is_some() => Ok(Prior::Dense(DensePrior::from_json(s)?)),
            None if v.get("mu").is_some() => Ok(Prior::Em(EmPrior::from_json(s)?)),
            None => Err(Error::UnsupportedFormat("no \"kind\" field".into())),
        }
    }
}

/// A prior together with the observation noise used when conditioning.
#[derive(Clone, Copy, Debug)]
pub struct PriorHandle<'a> {
    pub prior: &'a Prior,
    pub obs_noise_var: f64,
}

impl<'a> PriorHandle<'a> {
    pub fn new(prior: &'a Prior, obs_noise_var: f64) -> Result<Self> {
        if !(obs_noise_var > 0.0) || !obs_noise_var.is_finite() {
            return Err(Error::InvalidSpec(format!("observation noise must be positive, got {obs_noise_var}")));
        }
        Ok(Self { prior, obs_noise_var })
    }

    /// Uses [`default_obs_noise`] for `train_y`.
    pub fn for_data(prior: &'a Prior, train_y: &[f64]) -> Self {
        Self {
            prior,
            obs_noise_var: default_obs_noise(train_y),
        }
    }
}

/// `1e-6 * var(train_y)`, at least `1e-10`.
pub fn default_obs_noise(train_y: &[f64]) -> f64 {
    let n = train_y.len();
    if n == 0 {
        return 1e-10;
    }
    let mean = train_y.iter().sum::<f64>() / n as f64;
    let var = train_y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
    (1e-6 * var).max(1e-10)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPredictive {
    pub locations: Vec<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Which linear-algebra route [`condition_with`] takes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConditionPath {
    /// Low rank for dense priors when `|train| + |query|` exceeds the grid
    /// size, explicit matrices otherwise.
    #[default]
    Auto,
    Explicit,
    LowRank,
}

pub fn condition(handle: &PriorHandle<'_>, train_x: &[f64], train_y: &[f64], query: &[f64]) -> Result<GaussianPredictive> {
    condition_with(handle, train_x, train_y, query, ConditionPath::Auto)
}

pub fn condition_with(
    handle: &PriorHandle<'_>,
    train_x: &[f64],
    train_y: &[f64],
    query: &[f64],
    path: ConditionPath,
) -> Result<GaussianPredictive> {
    if train_x.len() != train_y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} training inputs, {} targets",
            train_x.len(),
            train_y.len()
        )));
    }
    if query.is_empty() {
        return Err(Error::DimensionMismatch("query is empty".into()));
    }
    if train_x.iter().chain(train_y).chain(query).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("conditioning data"));
    }
    let prior = handle.prior;
    let low_rank = match (path, prior) {
        (ConditionPath::LowRank, Prior::Dense(_)) => true,
        (ConditionPath::Auto, Prior::Dense(p)) => train_x.len() + query.len() > p.grid.len(),
        _ => false,
    };
    if train_x.is_empty() {
        let mean = prior.mean(query)?;
        let mut cov = prior.cov(query, query)?;
        symmetrize(&mut cov);
        return Ok(GaussianPredictive {
            locations: query.to_vec(),
            mean,
            cov,
        });
    }
    let resid = DVector::from_column_slice(train_y) - prior.mean(train_x)?;
    let mean_q = prior.mean(query)?;
    let noise = handle.obs_noise_var;

    let (mean, mut cov) = match prior {
        Prior::Dense(dense) if low_rank => {
            // f = m + Phi w with w ~ N(0, I_r)
            let phi_x = dense.basis_features(train_x);
            let phi_q = dense.basis_features(query);
            let r = phi_x.ncols();
            let mut a = phi_x.transpose() * &phi_x / noise;
            for d in 0..r {
                a[(d, d)] += 1.0;
            }
            symmetrize(&mut a);
            let factor = robust_cholesky(&a, 0.0)?;
            let w_mean = factor.solve_vec(&(phi_x.transpose() * &resid / noise))?;
            let v = factor.solve_lower(&phi_q.transpose())?;
            (mean_q + &phi_q * w_mean, v.transpose() * &v)
        }
        _ => {
            let mut kxx = prior.cov(train_x, train_x)?;
            symmetrize(&mut kxx);
            for d in 0..train_x.len() {
                kxx[(d, d)] += noise;
            }
            let factor = robust_cholesky(&kxx, 0.0)?;
            let kxq = prior.cov(train_x, query)?;
            let kqq = prior.cov(query, query)?;
            let v = factor.solve_lower(&kxq)?;
            let a = factor.solve_lower_vec(&resid)?;
            (mean_q + v.transpose() * &a, kqq - v.transpose() * &v)
        }
    };
    symmetrize(&mut cov);
    Ok(GaussianPredictive {
        locations: query.to_vec(),
        mean,
        cov,
    })
}

/// `(mean, variance)` per location, negative variances clamped to 0.
pub fn predictive_marginals(p: &GaussianPredictive) -> Vec<(f64, f64)> {
    p.mean
        .iter()
        .zip(p.cov.diagonal().iter())
        .map(|(&m, &v)| (m, v.max(0.0)))
        .collect()
}

/// Draws `n` joint samples. The covariance (plus `1e-10 * trace / dim`) is
/// factored through its eigendecomposition with negative eigenvalues
/// clipped, so numerically indefinite predictives can still be sampled.
pub fn sample_paths(p: &GaussianPredictive, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let dim = p.mean.len();
    if p.cov.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch("predictive covariance shape".into()));
    }
    if p.cov.iter().chain(p.mean.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictive"));
    }
    let mut cov = p.cov.clone();
    let jitter = 1e-10 * cov.trace().max(0.0) / dim.max(1) as f64;
    for d in 0..dim {
        cov[(d, d)] += jitter;
    }
    let factor = psd_sqrt(&cov);
    let mut r = rng::seeded(seed);
    Ok((0..n)
        .map(|_| {
            let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut r));
            (&p.mean + &factor * z).iter().copied().collect()
        })
        .collect())
}

impl GaussianPredictive {
    /// Writes `x,mean,std,q05,q50,q95` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let z95 = Normal::standard().inverse_cdf(0.95);
        writeln!(out, "x,mean,std,q05,q50,q95")?;
        for (x, (m, v)) in self.locations.iter().zip(predictive_marginals(self)) {
            let s = v.sqrt();
            writeln!(out, "{x},{m},{s},{},{m},{}", m - z95 * s, m + z95 * s)?;
        }
        Ok(())
    }
}
