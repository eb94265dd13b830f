//! Block-structured matrices built from Markov parameters.
//!
//! Blocks are `d_y × d_u`. Indices in the docs are 1-based to match the
//! usual block notation; the code is 0-based.

use nalgebra::DMatrix;

use crate::error::{Result, SysIdError};
use crate::lti::StateSpaceSystem;

/// Relative singular value cutoff for rank statements about true Hankel matrices.
pub const HANKEL_RANK_TOL: f64 = 1e-8;

/// Truncated impulse response `G_τ = (CB, CAB, …, CA^{2τ−2}B)`, a
/// `d_y × (2τ−1)d_u` block row.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseBlockRow {
    data: DMatrix<f64>,
    tau: usize,
    d_u: usize,
    d_y: usize,
}

impl ImpulseBlockRow {
    pub fn new(data: DMatrix<f64>, tau: usize, d_u: usize, d_y: usize) -> Result<Self> {
        if tau == 0 || d_u == 0 || d_y == 0 {
            return Err(SysIdError::invalid("tau, d_u and d_y must be positive"));
        }
        if data.nrows() != d_y || data.ncols() != (2 * tau - 1) * d_u {
            return Err(SysIdError::invalid(format!(
                "impulse row must be {d_y}x{} for tau={tau}, got {}x{}",
                (2 * tau - 1) * d_u,
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { data, tau, d_u, d_y })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn input_dim(&self) -> usize {
        self.d_u
    }

    pub fn output_dim(&self) -> usize {
        self.d_y
    }

    /// Block `k` (0-based), i.e. `CA^kB` for a true system.
    pub fn block(&self, k: usize) -> DMatrix<f64> {
        self.data.columns(k * self.d_u, self.d_u).into_owned()
    }
}

/// A `τd_y × τd_u` matrix tagged with its block layout. Holds either a true
/// Hankel matrix or an unstructured estimate of one.
#[derive(Clone, Debug, PartialEq)]
pub struct HankelMatrix {
    data: DMatrix<f64>,
    tau: usize,
    d_u: usize,
    d_y: usize,
}

impl HankelMatrix {
    pub fn new(data: DMatrix<f64>, tau: usize, d_u: usize, d_y: usize) -> Result<Self> {
        if tau == 0 || d_u == 0 || d_y == 0 {
            return Err(SysIdError::invalid("tau, d_u and d_y must be positive"));
        }
        if data.shape() != (tau * d_y, tau * d_u) {
            return Err(SysIdError::invalid(format!(
                "Hankel matrix must be {}x{}, got {}x{}",
                tau * d_y,
                tau * d_u,
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { data, tau, d_u, d_y })
    }

    /// Same layout, new entries.
    pub fn with_data(&self, data: DMatrix<f64>) -> Result<Self> {
        Self::new(data, self.tau, self.d_u, self.d_y)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn input_dim(&self) -> usize {
        self.d_u
    }

    pub fn output_dim(&self) -> usize {
        self.d_y
    }

    /// Block `(i, j)` (0-based).
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.data
            .view((i * self.d_y, j * self.d_u), (self.d_y, self.d_u))
            .into_owned()
    }

    /// `H→`: all but the last block column.
    pub fn drop_last_block_column(&self) -> Result<DMatrix<f64>> {
        if self.tau < 2 {
            return Err(SysIdError::invalid("dropping a block column needs tau >= 2"));
        }
        Ok(self.data.columns(0, (self.tau - 1) * self.d_u).into_owned())
    }

    /// `H←`: all but the first block column.
    pub fn drop_first_block_column(&self) -> Result<DMatrix<f64>> {
        if self.tau < 2 {
            return Err(SysIdError::invalid("dropping a block column needs tau >= 2"));
        }
        Ok(self.data.columns(self.d_u, (self.tau - 1) * self.d_u).into_owned())
    }
}

pub fn impulse_block_row(system: &StateSpaceSystem, tau: usize) -> Result<ImpulseBlockRow> {
    if tau == 0 {
        return Err(SysIdError::invalid("tau must be positive"));
    }
    let (d_u, d_y) = (system.input_dim(), system.output_dim());
    let mut data = DMatrix::zeros(d_y, (2 * tau - 1) * d_u);
    for (k, g) in system.markov_parameters(2 * tau - 1).into_iter().enumerate() {
        data.columns_mut(k * d_u, d_u).copy_from(&g);
    }
    ImpulseBlockRow::new(data, tau, d_u, d_y)
}

/// The linear map `G_τ ↦ H_τ`: block `(i, j)` of the result is block
/// `i + j` of `g` (0-based).
pub fn hankel_from_impulse(g: &ImpulseBlockRow) -> HankelMatrix {
    let (tau, d_u, d_y) = (g.tau, g.d_u, g.d_y);
    let mut data = DMatrix::zeros(tau * d_y, tau * d_u);
    for i in 0..tau {
        for j in 0..tau {
            data.view_mut((i * d_y, j * d_u), (d_y, d_u))
                .copy_from(&g.data.columns((i + j) * d_u, d_u));
        }
    }
    HankelMatrix { data, tau, d_u, d_y }
}

/// `H_τ` of a known system.
pub fn true_hankel(system: &StateSpaceSystem, tau: usize) -> Result<HankelMatrix> {
    Ok(hankel_from_impulse(&impulse_block_row(system, tau)?))
}

/// `H_{t,τ1,τ2}`: a `τ1 d_y × τ2 d_u` matrix whose 1-based block `(i, j)`
/// is `CA^{t+i+j−2}B`. `tau2 = 0` gives an empty matrix.
pub fn block_hankel(system: &StateSpaceSystem, t: usize, tau1: usize, tau2: usize) -> DMatrix<f64> {
    let (d_u, d_y) = (system.input_dim(), system.output_dim());
    let mut out = DMatrix::zeros(tau1 * d_y, tau2 * d_u);
    if tau1 == 0 || tau2 == 0 {
        return out;
    }
    let markov = system.markov_parameters(t + tau1 + tau2 - 1);
    for i in 0..tau1 {
        for j in 0..tau2 {
            out.view_mut((i * d_y, j * d_u), (d_y, d_u))
                .copy_from(&markov[t + i + j]);
        }
    }
    out
}

/// `T_{t,τ}`: strictly lower block-triangular, 1-based block `(i, j)` equal to
/// `CA^{t+i−j−1}B` for `i > j`.
pub fn block_toeplitz(system: &StateSpaceSystem, t: usize, tau: usize) -> DMatrix<f64> {
    let (d_u, d_y) = (system.input_dim(), system.output_dim());
    let mut out = DMatrix::zeros(tau * d_y, tau * d_u);
    if tau < 2 {
        return out;
    }
    let markov = system.markov_parameters(t + tau - 1);
    for i in 1..tau {
        for j in 0..i {
            out.view_mut((i * d_y, j * d_u), (d_y, d_u))
                .copy_from(&markov[t + i - j - 1]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank;
    use crate::seed::RandomSeed;
    use approx::assert_abs_diff_eq;

    fn scalar(a: f64, b: f64) -> StateSpaceSystem {
        StateSpaceSystem::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    fn half() -> HankelMatrix {
        HankelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.25]), 2, 1, 1).unwrap()
    }

    #[test]
    fn impulse_row_scalar() {
        let g = impulse_block_row(&scalar(0.5, 1.0), 2).unwrap();
        assert_eq!(g.data(), &DMatrix::from_row_slice(1, 3, &[1.0, 0.5, 0.25]));
        let g0 = impulse_block_row(&scalar(0.5, 0.0), 3).unwrap();
        assert!(g0.data().iter().all(|&v| v == 0.0));
        assert!(impulse_block_row(&scalar(0.5, 1.0), 0).is_err());
    }

    #[test]
    fn impulse_row_blocks_are_markov_parameters() {
        let sys = StateSpaceSystem::random(4, 3, 2, RandomSeed(4)).unwrap();
        let g = impulse_block_row(&sys, 4).unwrap();
        for k in 0..7 {
            assert_abs_diff_eq!((g.block(k) - sys.markov_parameter(k)).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn malformed_impulse_row() {
        assert!(ImpulseBlockRow::new(DMatrix::zeros(1, 4), 2, 1, 1).is_err());
        assert!(ImpulseBlockRow::new(DMatrix::zeros(2, 3), 2, 1, 1).is_err());
        assert!(HankelMatrix::new(DMatrix::zeros(2, 3), 2, 1, 1).is_err());
    }

    #[test]
    fn hankel_from_impulse_scalar() {
        let g = ImpulseBlockRow::new(DMatrix::from_row_slice(1, 3, &[1.0, 0.5, 0.25]), 2, 1, 1).unwrap();
        assert_eq!(hankel_from_impulse(&g), half());
        let z = ImpulseBlockRow::new(DMatrix::zeros(2, 9), 2, 3, 2).unwrap();
        assert_eq!(hankel_from_impulse(&z).data(), &DMatrix::zeros(4, 6));
    }

    #[test]
    fn true_hankel_scalar_rank_one() {
        let h = true_hankel(&scalar(0.5, 1.0), 2).unwrap();
        assert_eq!(h, half());
        let s = lowrank::singular_values(h.data()).unwrap();
        assert_abs_diff_eq!(s[0], 1.25, epsilon = 1e-14);
        assert_eq!(lowrank::numerical_rank(h.data(), HANKEL_RANK_TOL).unwrap(), 1);

        let z = true_hankel(&scalar(0.5, 0.0), 3).unwrap();
        assert_eq!(lowrank::numerical_rank(z.data(), HANKEL_RANK_TOL).unwrap(), 0);
    }

    #[test]
    fn hankel_blocks_match_markov() {
        let sys = StateSpaceSystem::random(3, 2, 3, RandomSeed(17)).unwrap();
        let h = true_hankel(&sys, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!((h.block(i, j) - sys.markov_parameter(i + j)).norm(), 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn drop_block_columns() {
        let h = half();
        assert_eq!(h.drop_last_block_column().unwrap(), DMatrix::from_column_slice(2, 1, &[1.0, 0.5]));
        assert_eq!(h.drop_first_block_column().unwrap(), DMatrix::from_column_slice(2, 1, &[0.5, 0.25]));

        let wide = HankelMatrix::new(DMatrix::from_fn(2, 4, |i, j| (i * 4 + j) as f64), 2, 2, 1).unwrap();
        assert_eq!(wide.drop_last_block_column().unwrap(), wide.data().columns(0, 2).into_owned());
        assert_eq!(wide.drop_first_block_column().unwrap(), wide.data().columns(2, 2).into_owned());

        let zero = HankelMatrix::new(DMatrix::zeros(3, 6), 3, 2, 1).unwrap();
        assert!(zero.drop_first_block_column().unwrap().iter().all(|&v| v == 0.0));

        let tiny = HankelMatrix::new(DMatrix::zeros(1, 1), 1, 1, 1).unwrap();
        assert!(tiny.drop_last_block_column().is_err());
        assert!(tiny.drop_first_block_column().is_err());
    }

    #[test]
    fn shifted_blocks_of_h_left() {
        let sys = StateSpaceSystem::random(3, 2, 2, RandomSeed(23)).unwrap();
        let h = true_hankel(&sys, 4).unwrap();
        let left = h.drop_first_block_column().unwrap();
        for i in 0..4 {
            for j in 0..3 {
                let block = left.view((i * 2, j * 2), (2, 2)).into_owned();
                assert_abs_diff_eq!((block - sys.markov_parameter(i + j + 1)).norm(), 0.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn block_hankel_cases() {
        let sys = StateSpaceSystem::random(3, 2, 2, RandomSeed(1)).unwrap();
        assert_eq!(&block_hankel(&sys, 0, 4, 4), true_hankel(&sys, 4).unwrap().data());
        assert_eq!(block_hankel(&sys, 3, 4, 0).shape(), (8, 0));
        assert_eq!(block_hankel(&scalar(0.5, 1.0), 1, 1, 1), DMatrix::from_element(1, 1, 0.5));
    }

    #[test]
    fn block_toeplitz_cases() {
        assert_eq!(block_toeplitz(&scalar(0.5, 1.0), 0, 1), DMatrix::zeros(1, 1));
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.5, 1.0, 0.0]);
        assert_eq!(block_toeplitz(&scalar(0.5, 1.0), 0, 3), expected);
        assert_eq!(block_toeplitz(&scalar(0.5, 0.0), 2, 4), DMatrix::zeros(4, 4));
    }
}
