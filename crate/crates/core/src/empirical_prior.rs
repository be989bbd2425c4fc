//! Empirical prior for densely observed paths.
//!
//! Each path is linearly interpolated onto a shared grid `Z`. With `Y` the
//! `K x M` matrix of centered grid values, the empirical covariance at the
//! grid is `Y^T Y / K`. A thin SVD `Y = U S V^T` replaces the `K` paths by
//! `r = min(K, M)` basis rows `S V^T / sqrt(K)`, so that
//! `k(x, x') = sum_j v_j(x) v_j(x')` where `v_j` linearly interpolates the
//! j-th basis row. Outside the grid all interpolants clamp to the end values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, SamplePath};
use crate::error::{Error, Result};
use crate::numerics::thin_svd;

pub const DENSE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
}

/// Bracketing knots and the weight on the right knot for a query `x`.
fn bracket(knots: &[f64], x: f64) -> (usize, usize, f64) {
    let n = knots.len();
    if n == 1 || x <= knots[0] {
        return (0, 0, 0.0);
    }
    if x >= knots[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    // first knot strictly greater than x; 1 <= hi <= n-1
    let hi = knots.partition_point(|&k| k <= x);
    let lo = hi - 1;
    let t = (x - knots[lo]) / (knots[hi] - knots[lo]);
    (lo, hi, t)
}

fn interp_at(knots: &[f64], values: &[f64], x: f64) -> f64 {
    let (lo, hi, t) = bracket(knots, x);
    if t == 0.0 {
        values[lo]
    } else {
        (1.0 - t) * values[lo] + t * values[hi]
    }
}

/// Piecewise-linear interpolation of `path`, clamped outside its range.
pub fn interpolate(path: &SamplePath, query: &[f64]) -> Vec<f64> {
    query.iter().map(|&x| interp_at(&path.xs, &path.ys, x)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensePrior {
    pub grid: Vec<f64>,
    pub mean: DVector<f64>,
    /// `r x M` scaled eigen-observations.
    pub basis: DMatrix<f64>,
    pub num_paths: usize,
    pub interp: Interp,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("grid"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidPath("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Fits the dense empirical prior of `corpus` on `grid`.
pub fn fit_dense(corpus: &Corpus, grid: &[f64]) -> Result<DensePrior> {
    let k = corpus.paths.len();
    if k < 2 {
        return Err(Error::TooFewPaths(k));
    }
    check_grid(grid)?;
    let m = grid.len();
    let mut y = DMatrix::zeros(k, m);
    for (i, p) in corpus.paths.iter().enumerate() {
        for (j, v) in interpolate(p, grid).into_iter().enumerate() {
            y[(i, j)] = v;
        }
    }
    // fixed row order keeps the mean bit-reproducible
    let mean = DVector::from_fn(m, |j, _| y.column(j).iter().sum::<f64>() / k as f64);
    for mut row in y.row_iter_mut() {
        row -= mean.transpose();
    }
    let svd = thin_svd(&y)?;
    let scale = 1.0 / (k as f64).sqrt();
    let mut basis = svd.vt;
    for (mut row, s) in basis.row_iter_mut().zip(svd.s.iter()) {
        row *= s * scale;
    }
    Ok(DensePrior {
        grid: grid.to_vec(),
        mean,
        basis,
        num_paths: k,
        interp: Interp::Linear,
    })
}

impl DensePrior {
    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }

    /// `basis^T basis`, the covariance at the grid.
    pub fn grid_covariance(&self) -> DMatrix<f64> {
        self.basis.transpose() * &self.basis
    }

    pub fn prior_mean(&self, query: &[f64]) -> DVector<f64> {
        let mean = self.mean.as_slice();
        DVector::from_iterator(query.len(), query.iter().map(|&x| interp_at(&self.grid, mean, x)))
    }

    /// Feature matrix `Phi` (`|query| x r`) with `Phi[a, j] = v_j(query[a])`,
    /// so the covariance between two query sets is `Phi_a Phi_b^T`.
    pub fn basis_features(&self, query: &[f64]) -> DMatrix<f64> {
        let r = self.rank();
        let mut phi = DMatrix::zeros(query.len(), r);
        for (a, &x) in query.iter().enumerate() {
            let (lo, hi, t) = bracket(&self.grid, x);
            for j in 0..r {
                phi[(a, j)] = if t == 0.0 {
                    self.basis[(j, lo)]
                } else {
                    (1.0 - t) * self.basis[(j, lo)] + t * self.basis[(j, hi)]
                };
            }
        }
        phi
    }

    pub fn prior_cov(&self, qa: &[f64], qb: &[f64]) -> DMatrix<f64> {
        let fa = self.basis_features(qa);
        if qa == qb {
            return &fa * fa.transpose();
        }
        let fb = self.basis_features(qb);
        &fa * fb.transpose()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DenseFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<DenseFile>(s)?.try_into()
    }
}

/// On-disk layout of a [`DensePrior`].
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct DenseFile {
    pub version: u32,
    #[serde(default = "dense_kind")]
    pub kind: String,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub num_paths: usize,
    pub interp: Interp,
}

fn dense_kind() -> String {
    "dense".into()
}

impl From<&DensePrior> for DenseFile {
    fn from(p: &DensePrior) -> Self {
        DenseFile {
            version: DENSE_FORMAT_VERSION,
            kind: dense_kind(),
            grid: p.grid.clone(),
            mean: p.mean.iter().copied().collect(),
            basis: p.basis.row_iter().map(|r| r.iter().copied().collect()).collect(),
            num_paths: p.num_paths,
            interp: p.interp,
        }
    }
}

impl TryFrom<DenseFile> for DensePrior {
    type Error = Error;

    fn try_from(f: DenseFile) -> Result<Self> {
        if f.version != DENSE_FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(format!("dense prior version {}", f.version)));
        }
        check_grid(&f.grid)?;
        let m = f.grid.len();
        if f.mean.len() != m || f.basis.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "dense prior grid has {m} points but mean/basis rows disagree"
            )));
        }
        let r = f.basis.len();
        Ok(DensePrior {
            grid: f.grid,
            mean: DVector::from_vec(f.mean),
            basis: DMatrix::from_fn(r, m, |i, j| f.basis[i][j]),
            num_paths: f.num_paths,
            interp: f.interp,
        })
    }
}
