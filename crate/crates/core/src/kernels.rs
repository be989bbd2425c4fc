//! Parametric base kernels and mean functions over 1-D inputs.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::numerics::robust_cholesky;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
    Matern52,
    Matern32,
    Periodic,
    Linear,
    Quadratic,
}

impl KernelFamily {
    pub fn is_stationary(self) -> bool {
        !matches!(self, KernelFamily::Linear | KernelFamily::Quadratic)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Matern52 => "matern52",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Periodic => "periodic",
            KernelFamily::Linear => "linear",
            KernelFamily::Quadratic => "quadratic",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "rbf" => KernelFamily::Rbf,
            "matern52" => KernelFamily::Matern52,
            "matern32" => KernelFamily::Matern32,
            "periodic" => KernelFamily::Periodic,
            "linear" => KernelFamily::Linear,
            "quadratic" => KernelFamily::Quadratic,
            other => return Err(Error::InvalidSpec(format!("unknown kernel family {other:?}"))),
        })
    }
}

/// A kernel family with its hyperparameters.
///
/// Stationary families are functions of `d = |x - x'|`:
///
/// | family     | `k(d)` |
/// |------------|--------|
/// | `rbf`      | `a exp(-d^2 / 2l^2)` |
/// | `matern52` | `a (1 + sqrt5 d/l + 5d^2/3l^2) exp(-sqrt5 d/l)` |
/// | `matern32` | `a (1 + sqrt3 d/l) exp(-sqrt3 d/l)` |
/// | `periodic` | `a exp(-2 sin^2(pi d / p) / l^2)` |
///
/// The dot-product families use `lin(x, x') = 1 + x x' / l^2`: `linear` is
/// `a lin(x, x')` and `quadratic` is `a lin(x, x')^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64, amplitude: f64) -> Self {
        Self {
            family,
            lengthscale,
            amplitude,
            period: None,
        }
    }

    pub fn periodic(lengthscale: f64, amplitude: f64, period: f64) -> Self {
        Self {
            family: KernelFamily::Periodic,
            lengthscale,
            amplitude,
            period: Some(period),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lengthscale", self.lengthscale)?;
        positive("amplitude", self.amplitude)?;
        if self.family == KernelFamily::Periodic {
            match self.period {
                Some(p) => positive("period", p)?,
                None => return Err(Error::InvalidSpec("periodic kernel needs a period".into())),
            }
        }
        Ok(())
    }

    /// Evaluates the kernel without validating the spec.
    pub(crate) fn eval(&self, x: f64, x2: f64) -> f64 {
        let a = self.amplitude;
        let l = self.lengthscale;
        match self.family {
            KernelFamily::Rbf => {
                let d = (x - x2) / l;
                a * (-0.5 * d * d).exp()
            }
            KernelFamily::Matern52 => {
                let r = 5f64.sqrt() * (x - x2).abs() / l;
                a * (1.0 + r + r * r / 3.0) * (-r).exp()
            }
            KernelFamily::Matern32 => {
                let r = 3f64.sqrt() * (x - x2).abs() / l;
                a * (1.0 + r) * (-r).exp()
            }
            KernelFamily::Periodic => {
                let p = self.period.unwrap_or(1.0);
                let s = (PI * (x - x2).abs() / p).sin();
                a * (-2.0 * s * s / (l * l)).exp()
            }
            KernelFamily::Linear => a * (1.0 + x * x2 / (l * l)),
            KernelFamily::Quadratic => {
                let lin = 1.0 + x * x2 / (l * l);
                a * lin * lin
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: f64, x2: f64) -> Result<f64> {
    spec.validate()?;
    if !x.is_finite() || !x2.is_finite() {
        return Err(Error::NonFinite("kernel input"));
    }
    Ok(spec.eval(x, x2))
}

pub fn kernel_matrix(spec: &KernelSpec, xs: &[f64]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("kernel input"));
    }
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval(xs[i], xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

pub fn cross_kernel_matrix(spec: &KernelSpec, xs: &[f64], zs: &[f64]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if xs.iter().chain(zs).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("kernel input"));
    }
    Ok(DMatrix::from_fn(xs.len(), zs.len(), |i, j| {
        spec.eval(xs[i], zs[j])
    }))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MeanSpec {
    #[default]
    Zero,
    Constant { value: f64 },
}

impl MeanSpec {
    pub fn eval(&self, _x: f64) -> f64 {
        match *self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Constant { value } => value,
        }
    }

    pub fn eval_many(&self, xs: &[f64]) -> DVector<f64> {
        DVector::from_iterator(xs.len(), xs.iter().map(|&x| self.eval(x)))
    }
}

/// Number of grid values per hyperparameter axis.
pub const HYPER_GRID_SIZE: usize = 16;
/// At most this many paths (evenly strided) enter the likelihood.
pub const HYPER_MAX_PATHS: usize = 256;

/// Lengthscales searched by [`fit_kernel_hyperparams`]: log-spaced on
/// `[1e-2, 1e2]`.
pub fn lengthscale_grid() -> Vec<f64> {
    crate::linspace(-2.0, 2.0, HYPER_GRID_SIZE)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

/// Grid-search the lengthscale and amplitude of `spec` by maximizing the
/// summed GP marginal log-likelihood of every path in the corpus.
///
/// Amplitudes are `v * 10^e` for `e` evenly spaced on `[-2, 2]`, where `v`
/// is the pooled variance of all values (1 when the data is constant). Each
/// path is modelled with the pooled mean as a constant mean and a nugget of
/// `1e-4 * v`. Other fields of `spec` (family, period) are kept.
pub fn fit_kernel_hyperparams(spec: &KernelSpec, corpus: &Corpus) -> Result<KernelSpec> {
    if corpus.paths.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let stride = corpus.paths.len().div_ceil(HYPER_MAX_PATHS);
    let paths: Vec<_> = corpus.paths.iter().step_by(stride).collect();

    let values: Vec<f64> = paths.iter().flat_map(|p| p.ys.iter().copied()).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var } else { 1.0 };
    let nugget = 1e-4 * scale;

    // Paths sharing input locations share one factorization.
    let mut groups: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    let mut order = Vec::new();
    for (i, p) in paths.iter().enumerate() {
        let key: Vec<u64> = p.xs.iter().map(|x| x.to_bits()).collect();
        let entry = groups.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(i);
    }

    let lengthscales = lengthscale_grid();
    let amplitudes: Vec<f64> = crate::linspace(-2.0, 2.0, HYPER_GRID_SIZE)
        .into_iter()
        .map(|e| scale * 10f64.powf(e))
        .collect();
    let candidates: Vec<KernelSpec> = lengthscales
        .iter()
        .flat_map(|&l| {
            amplitudes.iter().map(move |&a| KernelSpec {
                lengthscale: l,
                amplitude: a,
                ..*spec
            })
        })
        .collect();
    for c in &candidates {
        c.validate()?;
    }

    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|cand| {
            let mut total = 0.0;
            for key in &order {
                let members = &groups[key];
                let xs = &paths[members[0]].xs;
                let mut k = kernel_matrix(cand, xs).expect("validated");
                for d in 0..xs.len() {
                    k[(d, d)] += nugget;
                }
                let Ok(factor) = robust_cholesky(&k, 0.0) else {
                    return f64::NEG_INFINITY;
                };
                let log_det = factor.log_det();
                for &m in members {
                    let r = DVector::from_iterator(
                        xs.len(),
                        paths[m].ys.iter().map(|y| y - mean),
                    );
                    let a = factor.solve_lower_vec(&r).expect("dimensions match");
                    total -= 0.5
                        * (a.norm_squared()
                            + log_det
                            + xs.len() as f64 * (2.0 * PI).ln());
                }
            }
            total
        })
        .collect();

    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(candidates[best])
}
