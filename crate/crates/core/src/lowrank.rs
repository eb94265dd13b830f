//! SVD utilities: best rank-k approximation, hard singular value
//! thresholding and the Moore-Penrose pseudoinverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SysIdError};

/// Default relative cutoff for [`pseudoinverse`].
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

// The decompositions come from faer. nalgebra's bidiagonal SVD occasionally
// returns factors that do not reproduce rank-deficient block Hankel inputs.
fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SysIdError::invalid("SVD input has non-finite entries"));
    }
    Ok(())
}

/// Thin SVD `M = U diag(s) Vᵀ` with `s` sorted in decreasing order.
///
/// Signs are fixed so that the first nonzero entry of every left singular
/// vector is nonnegative.
#[derive(Clone, Debug)]
pub struct SvdFactorization {
    pub singular_values: DVector<f64>,
    /// `m × r`, orthonormal columns.
    pub left_vectors: DMatrix<f64>,
    /// `n × r`, orthonormal columns.
    pub right_vectors: DMatrix<f64>,
}

impl SvdFactorization {
    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    pub fn nrows(&self) -> usize {
        self.left_vectors.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.right_vectors.nrows()
    }

    /// Largest singular value, 0 for an empty matrix.
    pub fn largest(&self) -> f64 {
        self.singular_values.iter().copied().next().unwrap_or(0.0)
    }

    /// Number of singular values strictly above `rel_tol · s₁`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let s1 = self.largest();
        if s1 == 0.0 {
            return 0;
        }
        self.singular_values.iter().filter(|&&s| s > rel_tol * s1).count()
    }

    /// `Σ_{i ≤ k} s_i u_i v_iᵀ`.
    pub fn truncated(&self, k: usize) -> DMatrix<f64> {
        let k = k.min(self.len());
        let u = self.left_vectors.columns(0, k);
        let v = self.right_vectors.columns(0, k);
        let mut us = u.into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        us * v.transpose()
    }
}

/// Level below which singular values count as exact zeros.
fn zero_cutoff(svd: &SvdFactorization) -> f64 {
    svd.largest() * (svd.nrows().max(svd.ncols()) as f64) * f64::EPSILON
}

pub fn svd(m: &DMatrix<f64>) -> Result<SvdFactorization> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdFactorization {
            singular_values: DVector::zeros(0),
            left_vectors: DMatrix::zeros(rows, 0),
            right_vectors: DMatrix::zeros(cols, 0),
        });
    }
    let d = to_faer(m)
        .thin_svd()
        .map_err(|e| SysIdError::numerical(format!("SVD did not converge: {e:?}")))?;
    let (fu, fs, fv) = (d.U(), d.S(), d.V());
    let s = DVector::from_fn(k, |i, _| fs[i]);
    let mut u = DMatrix::from_fn(rows, k, |i, j| fu[(i, j)]);
    let mut v = DMatrix::from_fn(cols, k, |i, j| fv[(i, j)]);

    for j in 0..k {
        let first = u.column(j).iter().copied().find(|x| x.abs() > 1e-12);
        if matches!(first, Some(x) if x < 0.0) {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok(SvdFactorization {
        singular_values: s,
        left_vectors: u,
        right_vectors: v,
    })
}

/// Singular values only, decreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_finite(m)?;
    if m.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let s = to_faer(m)
        .singular_values()
        .map_err(|e| SysIdError::numerical(format!("SVD did not converge: {e:?}")))?;
    Ok(DVector::from_vec(s))
}

/// Spectral norm (largest singular value).
pub fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().copied().fold(0.0, f64::max))
}

/// Number of singular values above `rel_tol · s₁`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let s1 = s.iter().copied().fold(0.0, f64::max);
    if s1 == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > rel_tol * s1).count())
}

/// Best rank-`k` approximation `Π_k(M)`.
pub fn rank_k_approx(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let limit = m.nrows().min(m.ncols());
    if k > limit {
        return Err(SysIdError::invalid(format!(
            "rank {k} exceeds min(rows, cols) = {limit}"
        )));
    }
    Ok(svd(m)?.truncated(k))
}

/// Result of hard singular value thresholding.
#[derive(Clone, Debug)]
pub struct ThresholdedMatrix {
    pub matrix: DMatrix<f64>,
    /// `k_ξ`, the rank of `matrix`.
    pub effective_rank: usize,
    pub threshold: f64,
    /// Singular values of `matrix` (the retained ones), decreasing.
    pub retained: Vec<f64>,
}

/// `M(ξ)`: keep the singular triplets with `s_i ≥ ξ`.
///
/// Triplets that are numerically zero (below `s₁ · max(m, n) · ε`) are
/// dropped even when `ξ = 0`, so `effective_rank` is the rank of the output.
pub fn hard_threshold(m: &DMatrix<f64>, xi: f64) -> Result<ThresholdedMatrix> {
    let f = svd(m)?;
    hard_threshold_factored(&f, xi)
}

/// [`hard_threshold`] on a precomputed factorization.
pub fn hard_threshold_factored(f: &SvdFactorization, xi: f64) -> Result<ThresholdedMatrix> {
    if xi.is_nan() || xi < 0.0 || xi.is_infinite() {
        return Err(SysIdError::invalid(format!("threshold must be finite and nonnegative, got {xi}")));
    }
    let cutoff = zero_cutoff(f);
    // singular values are sorted, so the retained set is a prefix
    let k = f
        .singular_values
        .iter()
        .take_while(|&&s| s >= xi && s > cutoff)
        .count();
    Ok(ThresholdedMatrix {
        matrix: f.truncated(k),
        effective_rank: k,
        threshold: xi,
        retained: f.singular_values.iter().take(k).copied().collect(),
    })
}

/// Moore-Penrose pseudoinverse; singular values `≤ rel_tol · s₁` are zeroed.
pub fn pseudoinverse(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    if rel_tol.is_nan() || rel_tol < 0.0 {
        return Err(SysIdError::invalid("pseudoinverse tolerance must be nonnegative"));
    }
    let f = svd(m)?;
    let k = f.numerical_rank(rel_tol);
    let mut v = f.right_vectors.columns(0, k).into_owned();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        col /= f.singular_values[j];
    }
    Ok(v * f.left_vectors.columns(0, k).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(values))
    }

    #[test]
    fn svd_diagonal_and_rank_one() {
        let f = svd(&diag(&[3.0, 1.0])).unwrap();
        assert_abs_diff_eq!(f.singular_values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.singular_values[1], 1.0, epsilon = 1e-14);

        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.25]);
        let f = svd(&h).unwrap();
        assert_abs_diff_eq!(f.singular_values[0], 1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(f.singular_values[1], 0.0, epsilon = 1e-14);
        assert_eq!(f.numerical_rank(1e-8), 1);

        let z = svd(&DMatrix::zeros(3, 2)).unwrap();
        assert!(z.singular_values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn svd_sign_convention_and_shapes() {
        let m = DMatrix::from_row_slice(2, 3, &[-1.0, 2.0, 0.5, 3.0, -0.2, 1.0]);
        let f = svd(&m).unwrap();
        assert_eq!(f.left_vectors.shape(), (2, 2));
        assert_eq!(f.right_vectors.shape(), (3, 2));
        for j in 0..2 {
            let first = f.left_vectors.column(j).iter().copied().find(|x| x.abs() > 1e-12).unwrap();
            assert!(first > 0.0);
        }
        assert_abs_diff_eq!((f.truncated(2) - &m).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn svd_of_rank_one_block_matrix_recomposes() {
        // H→ of a first-order system with three inputs and outputs; nalgebra's
        // SVD returned non-reproducing factors for this one
        let sys = crate::lti::StateSpaceSystem::random(1, 3, 3, crate::seed::RandomSeed(346)).unwrap();
        let m = crate::hankel::true_hankel(&sys, 2).unwrap().drop_last_block_column().unwrap();
        let f = svd(&m).unwrap();
        let rebuilt = &f.left_vectors * DMatrix::from_diagonal(&f.singular_values) * f.right_vectors.transpose();
        assert!((rebuilt - &m).amax() < 1e-12);
        assert_abs_diff_eq!(f.singular_values[0], m.norm(), epsilon = 1e-12);
    }

    #[test]
    fn svd_empty_matrix() {
        let f = svd(&DMatrix::zeros(4, 0)).unwrap();
        assert!(f.is_empty());
        assert_eq!(f.truncated(0).shape(), (4, 0));
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(SysIdError::InvalidArgument(_))));
    }

    #[test]
    fn rank_k_cases() {
        let m = diag(&[3.0, 1.0]);
        assert_eq!(rank_k_approx(&m, 0).unwrap(), DMatrix::zeros(2, 2));
        assert_abs_diff_eq!((rank_k_approx(&m, 2).unwrap() - &m).norm(), 0.0, epsilon = 1e-14);
        let p1 = rank_k_approx(&m, 1).unwrap();
        assert_abs_diff_eq!((&p1 - diag(&[3.0, 0.0])).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((&m - &p1).norm_squared(), 1.0, epsilon = 1e-14);
        assert!(matches!(rank_k_approx(&m, 3), Err(SysIdError::InvalidArgument(_))));
    }

    #[test]
    fn threshold_cases() {
        let m = diag(&[3.0, 1.0]);
        let t = hard_threshold(&m, 2.0).unwrap();
        assert_eq!(t.effective_rank, 1);
        assert_abs_diff_eq!((&t.matrix - diag(&[3.0, 0.0])).norm(), 0.0, epsilon = 1e-14);

        let t = hard_threshold(&m, 0.0).unwrap();
        assert_eq!(t.effective_rank, 2);
        assert_abs_diff_eq!((&t.matrix - &m).norm(), 0.0, epsilon = 1e-14);

        let t = hard_threshold(&m, 3.5).unwrap();
        assert_eq!(t.effective_rank, 0);
        assert_eq!(t.matrix, DMatrix::zeros(2, 2));

        assert!(hard_threshold(&m, -1.0).is_err());
        assert!(hard_threshold(&m, f64::NAN).is_err());
    }

    #[test]
    fn threshold_keeps_ties() {
        let t = hard_threshold(&diag(&[3.0, 1.0]), 1.0).unwrap();
        assert_eq!(t.effective_rank, 2);
    }

    #[test]
    fn threshold_zero_on_rank_deficient_counts_rank() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.25]);
        assert_eq!(hard_threshold(&h, 0.0).unwrap().effective_rank, 1);
    }

    #[test]
    fn pinv_cases() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 7.0, 2.0, 6.0]);
        let direct = m.clone().try_inverse().unwrap();
        assert_abs_diff_eq!((pseudoinverse(&m, DEFAULT_PINV_TOL).unwrap() - direct).norm(), 0.0, epsilon = 1e-10);

        assert_eq!(pseudoinverse(&DMatrix::zeros(2, 3), DEFAULT_PINV_TOL).unwrap(), DMatrix::zeros(3, 2));

        let v = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 2.0]);
        let expected = v.transpose() / 9.0;
        assert_abs_diff_eq!((pseudoinverse(&v, DEFAULT_PINV_TOL).unwrap() - expected).norm(), 0.0, epsilon = 1e-14);
    }
}
