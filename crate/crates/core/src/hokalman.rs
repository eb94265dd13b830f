//! Ho-Kalman realization and its thresholded, order-adaptive variant.
//!
//! Given a Hankel matrix `H`, factor `H→ = U S Vᵀ`, set `O = U S^{1/2}`,
//! `Q = S^{1/2} Vᵀ`, and read off
//!
//! ```text
//! A = O† H← Q†,   B = Q[:, :d_u],   C = O[:d_y, :]
//! ```
//!
//! The thresholded variant first replaces `H` with `H(ξ)` and reports
//! `rank(H(ξ))` as the order estimate.

use nalgebra::{DMatrix, DVector};
use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Result, SysIdError};
use crate::hankel::HankelMatrix;
use crate::lowrank::{self, DEFAULT_PINV_TOL};

/// Relative cutoff for the compact SVD of `H→`.
pub const FACTOR_RANK_TOL: f64 = 1e-12;

/// A realization `(A, B, C)` recovered up to a change of state basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl Realization {
    pub fn empty(d_u: usize, d_y: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, d_u),
            c: DMatrix::zeros(d_y, 0),
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `Ĉ Â^k B̂`; zero for the empty realization.
    pub fn markov_parameter(&self, k: usize) -> DMatrix<f64> {
        let mut akb = self.b.clone();
        for _ in 0..k {
            akb = &self.a * akb;
        }
        &self.c * akb
    }
}

/// Factor a rank-`rank` truncation of `H→` and solve for `(A, B, C)`.
fn factor(h: &HankelMatrix, h_right: &DMatrix<f64>, h_left: &DMatrix<f64>, rank: usize) -> Result<Realization> {
    let (d_u, d_y) = (h.input_dim(), h.output_dim());
    if rank == 0 {
        return Ok(Realization::empty(d_u, d_y));
    }
    let f = lowrank::svd(h_right)?;
    let sqrt_s = DVector::from_iterator(rank, f.singular_values.iter().take(rank).map(|s| s.sqrt()));

    let mut o = f.left_vectors.columns(0, rank).into_owned();
    for (j, mut col) in o.column_iter_mut().enumerate() {
        col *= sqrt_s[j];
    }
    let mut q = f.right_vectors.columns(0, rank).transpose();
    for (i, mut row) in q.row_iter_mut().enumerate() {
        row *= sqrt_s[i];
    }

    let a = lowrank::pseudoinverse(&o, DEFAULT_PINV_TOL)? * h_left * lowrank::pseudoinverse(&q, DEFAULT_PINV_TOL)?;
    let b = q.columns(0, d_u).into_owned();
    let c = o.rows(0, d_y).into_owned();
    if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
        return Err(SysIdError::numerical("realization has non-finite entries"));
    }
    Ok(Realization { a, b, c })
}

/// Classic Ho-Kalman with a prescribed order.
///
/// For an exact system Hankel matrix with `τ ≥ n + 1` and `rank = n` the
/// output equals the true `(A, B, C)` up to an invertible similarity.
pub fn ho_kalman(h: &HankelMatrix, rank: usize) -> Result<Realization> {
    let h_right = h.drop_last_block_column()?;
    let h_left = h.drop_first_block_column()?;
    let available = lowrank::numerical_rank(&h_right, FACTOR_RANK_TOL)?;
    if rank == 0 || rank > available {
        return Err(SysIdError::invalid(format!(
            "requested rank {rank} but H→ has numerical rank {available}"
        )));
    }
    factor(h, &h_right, &h_left, rank)
}

/// Output of [`thresholded_ho_kalman`].
#[derive(Clone, Debug)]
pub struct IdentificationResult {
    /// Estimated order `k_ξ = rank(Ĥ(ξ))`.
    pub order: usize,
    pub realization: Realization,
    /// Threshold ξ.
    pub threshold: f64,
    /// Singular values of `Ĥ` that survived thresholding.
    pub retained_singular_values: Vec<f64>,
}

impl IdentificationResult {
    /// Dimension of the returned realization. Equal to `order` except when
    /// `Ĥ(ξ)→` has lower numerical rank than `Ĥ(ξ)`.
    pub fn realized_order(&self) -> usize {
        self.realization.order()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("identification result serializes")
    }
}

impl Serialize for IdentificationResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("IdentificationResult", 6)?;
        s.serialize_field("order", &self.order)?;
        s.serialize_field("A", &crate::io::matrix_rows(&self.realization.a))?;
        s.serialize_field("B", &crate::io::matrix_rows(&self.realization.b))?;
        s.serialize_field("C", &crate::io::matrix_rows(&self.realization.c))?;
        s.serialize_field("xi", &self.threshold)?;
        s.serialize_field("singular_values", &self.retained_singular_values)?;
        s.end()
    }
}

/// Thresholded Ho-Kalman: threshold `Ĥ` at ξ, then run Ho-Kalman on the
/// result with the order read off the retained spectrum.
pub fn thresholded_ho_kalman(h_hat: &HankelMatrix, xi: f64) -> Result<IdentificationResult> {
    if h_hat.tau() < 2 {
        return Err(SysIdError::invalid("thresholded Ho-Kalman needs tau >= 2"));
    }
    let thresholded = lowrank::hard_threshold(h_hat.data(), xi)?;
    let order = thresholded.effective_rank;
    let h_xi = h_hat.with_data(thresholded.matrix)?;
    let realization = if order == 0 {
        Realization::empty(h_hat.input_dim(), h_hat.output_dim())
    } else {
        let h_right = h_xi.drop_last_block_column()?;
        let h_left = h_xi.drop_first_block_column()?;
        let r = lowrank::numerical_rank(&h_right, FACTOR_RANK_TOL)?.min(order);
        factor(&h_xi, &h_right, &h_left, r)?
    };
    if realization.order() != order {
        log::debug!(
            "H(xi)-> has rank {} below the effective rank {order}",
            realization.order()
        );
    }
    Ok(IdentificationResult {
        order,
        realization,
        threshold: xi,
        retained_singular_values: thresholded.retained,
    })
}
