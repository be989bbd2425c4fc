//! Dense linear algebra shared by the estimators: jittered Cholesky, PSD
//! solves, thin SVD and a few matrix diagnostics.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Lower Cholesky factor of `m + jitter_used * I`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    pub lower: DMatrix<f64>,
    pub jitter_used: f64,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log det(m + jitter * I)`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `L^{-1} rhs`.
    pub fn solve_lower(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_rows(self.dim(), rhs.nrows())?;
        Ok(self
            .lower
            .solve_lower_triangular(rhs)
            .expect("cholesky diagonal is positive"))
    }

    pub fn solve_lower_vec(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        check_rows(self.dim(), rhs.nrows())?;
        Ok(self
            .lower
            .solve_lower_triangular(rhs)
            .expect("cholesky diagonal is positive"))
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let half = self.solve_lower_vec(rhs)?;
        Ok(self
            .lower
            .tr_solve_lower_triangular(&half)
            .expect("cholesky diagonal is positive"))
    }
}

fn check_rows(dim: usize, rows: usize) -> Result<()> {
    if dim != rows {
        return Err(Error::DimensionMismatch(format!(
            "factor has dimension {dim}, right-hand side has {rows} rows"
        )));
    }
    Ok(())
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let tol = 1e-10 * max_abs(m);
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// Symmetric and all eigenvalues at least `-1e-8 * trace / dim`.
pub fn is_numerically_psd(m: &DMatrix<f64>) -> bool {
    if !is_symmetric(m) {
        return false;
    }
    let n = m.nrows().max(1) as f64;
    min_eigenvalue(m) >= -1e-8 * m.trace().abs() / n
}

/// Cholesky factorization with geometric jitter escalation.
///
/// The first attempt adds `base_jitter`. On failure the jitter restarts at
/// `1e-10 * mean_diag` (or grows tenfold if already above that) until it
/// exceeds `1e-2 * mean_diag`.
pub fn robust_cholesky(m: &DMatrix<f64>, base_jitter: f64) -> Result<CholeskyFactor> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to factorize"));
    }
    if !is_symmetric(m) {
        return Err(Error::DimensionMismatch("matrix is not symmetric".into()));
    }
    let n = m.nrows();
    let mean_diag = if n == 0 { 0.0 } else { m.trace() / n as f64 };
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let cap = 1e-2 * scale;

    let mut jitter = base_jitter.max(0.0);
    loop {
        let mut shifted = m.clone();
        if jitter > 0.0 {
            for i in 0..n {
                shifted[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Ok(CholeskyFactor {
                lower: chol.unpack(),
                jitter_used: jitter,
            });
        }
        if jitter >= cap {
            return Err(Error::NotPsd { jitter });
        }
        jitter = if jitter < 1e-10 * scale {
            1e-10 * scale
        } else {
            (jitter * 10.0).min(cap)
        };
    }
}

/// Solves `(m + jitter * I) x = rhs` given the factor of `m`.
pub fn solve_psd(factor: &CholeskyFactor, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let half = factor.solve_lower(rhs)?;
    Ok(factor
        .lower
        .tr_solve_lower_triangular(&half)
        .expect("cholesky diagonal is positive"))
}

/// Thin SVD of a `K x M` matrix.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    /// `K x r`
    pub u: DMatrix<f64>,
    /// `r` singular values, descending.
    pub s: DVector<f64>,
    /// `r x M`
    pub vt: DMatrix<f64>,
}

pub fn thin_svd(y: &DMatrix<f64>) -> Result<ThinSvd> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to decompose"));
    }
    let r = y.nrows().min(y.ncols());
    if r == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(y.nrows(), 0),
            s: DVector::zeros(0),
            vt: DMatrix::zeros(0, y.ncols()),
        });
    }
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    Ok(ThinSvd {
        u: DMatrix::from_fn(y.nrows(), r, |i, j| u[(i, order[j])]),
        s: DVector::from_fn(r, |j, _| svd.singular_values[order[j]].max(0.0)),
        vt: DMatrix::from_fn(r, y.ncols(), |i, j| vt[(order[i], j)]),
    })
}

/// A square root `F` with `F F^T = m`, from the eigendecomposition of `m`
/// with negative eigenvalues clipped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let mut factor = eig.eigenvectors;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let scale = lambda.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(scale);
    }
    factor
}

pub fn relative_frobenius(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let denom = reference.norm();
    let diff = (a - reference).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reconstruct(f: &CholeskyFactor) -> DMatrix<f64> {
        &f.lower * f.lower.transpose()
    }

    #[test]
    fn identity_factorizes_without_jitter() {
        let f = robust_cholesky(&DMatrix::identity(3, 3), 0.0).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        assert_eq!(f.lower, DMatrix::identity(3, 3));
    }

    #[test]
    fn two_by_two_factor() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = robust_cholesky(&m, 0.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert_relative_eq!(f.lower, expected, epsilon = 1e-14);
        assert_relative_eq!(reconstruct(&f), m, epsilon = 1e-12);
    }

    #[test]
    fn rank_one_needs_jitter() {
        let m = DMatrix::from_element(2, 2, 1.0);
        // eigenvalues of [[1,1],[1,1]] are 2 and 0
        assert!(min_eigenvalue(&m).abs() < 1e-12);
        let f = robust_cholesky(&m, 0.0).unwrap();
        assert!(f.jitter_used > 0.0);
        let err = (reconstruct(&f) - &m).norm();
        assert!(err <= f.jitter_used * 2f64.sqrt() + 1e-12, "err {err}");
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(robust_cholesky(&m, 0.0), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn non_square_is_dimension_mismatch() {
        let m = DMatrix::zeros(2, 3);
        assert!(matches!(
            robust_cholesky(&m, 0.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn solve_examples() {
        let id = robust_cholesky(&DMatrix::identity(2, 2), 0.0).unwrap();
        let b = DMatrix::from_column_slice(2, 1, &[3.0, -1.0]);
        assert_eq!(solve_psd(&id, &b).unwrap(), b);

        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = robust_cholesky(&m, 0.0).unwrap();
        let x = solve_psd(&f, &DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert_relative_eq!(x[(0, 0)], 0.375, epsilon = 1e-14);
        assert_relative_eq!(x[(1, 0)], -0.25, epsilon = 1e-14);
        // multiply back
        assert_relative_eq!(&m * &x, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]), epsilon = 1e-14);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0]));
        let f = robust_cholesky(&d, 0.0).unwrap();
        let x = solve_psd(&f, &DMatrix::from_column_slice(2, 1, &[2.0, 10.0])).unwrap();
        assert_relative_eq!(x, DMatrix::from_column_slice(2, 1, &[1.0, 2.0]), epsilon = 1e-14);
    }

    #[test]
    fn solve_rejects_wrong_rows() {
        let f = robust_cholesky(&DMatrix::identity(2, 2), 0.0).unwrap();
        assert!(matches!(
            solve_psd(&f, &DMatrix::zeros(3, 1)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn svd_examples() {
        let z = thin_svd(&DMatrix::zeros(4, 3)).unwrap();
        assert!(z.s.iter().all(|&s| s == 0.0));

        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let svd = thin_svd(&d).unwrap();
        assert_relative_eq!(svd.s[0], 3.0, epsilon = 1e-14);
        assert_relative_eq!(svd.s[1], 1.0, epsilon = 1e-14);

        let mut y = DMatrix::zeros(2, 2);
        y[(0, 1)] = f64::NAN;
        assert!(matches!(thin_svd(&y), Err(Error::NonFinite(_))));
    }

    #[test]
    fn svd_reconstructs_random_tall_matrix() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::seeded(3);
        let y = DMatrix::from_fn(50, 8, |_, _| StandardNormal.sample(&mut rng));
        let svd = thin_svd(&y).unwrap();
        assert_eq!(svd.u.shape(), (50, 8));
        assert_eq!(svd.vt.shape(), (8, 8));
        let back = &svd.u * DMatrix::from_diagonal(&svd.s) * &svd.vt;
        assert!(relative_frobenius(&back, &y) < 1e-10);
        assert!(svd.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let gram = y.transpose() * &y;
        let via_v = svd.vt.transpose() * DMatrix::from_diagonal(&svd.s.map(|s| s * s)) * &svd.vt;
        assert!(relative_frobenius(&via_v, &gram) < 1e-8);
    }

    #[test]
    fn psd_sqrt_reconstructs() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let f = psd_sqrt(&m);
        assert_relative_eq!(&f * f.transpose(), m, epsilon = 1e-12);
    }
}
