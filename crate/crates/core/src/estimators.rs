//! Least-squares Hankel estimators and their data-driven thresholds.
//!
//! Two data regimes are supported:
//!
//! * **single trajectory**: one run of length `T`; row `t` of the regression
//!   stacks `ỹ_t = (y_t, …, y_{t+τ−1})` against `ũ_t = (u_{t−1}, …, u_{t−τ})`
//!   and the fitted `τd_y × τd_u` matrix is the Hankel estimate directly.
//! * **multiple trajectories**: `T' = ⌊T/(2τ−1)⌋` runs from rest; each gives
//!   one row `y_{2τ}` against `ū = (u_{2τ−1}, …, u_1)`. The fitted
//!   `d_y × (2τ−1)d_u` matrix estimates `G_τ` and is mapped to a Hankel matrix.
//!
//! Thresholds and sample-size floors are closed-form and use natural logs.

use nalgebra::DMatrix;

use crate::error::{Result, SysIdError};
use crate::hankel::{hankel_from_impulse, HankelMatrix, ImpulseBlockRow};
use crate::lowrank;
use crate::lti::Trajectory;

/// Relative singular value cutoff for the full-column-rank check of a design.
pub const REGRESSOR_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignLayout {
    Single { tau: usize, d_u: usize, d_y: usize },
    Multi { tau: usize, d_u: usize, d_y: usize },
}

/// Stacked regression problem, one sample per row.
#[derive(Clone, Debug)]
pub struct RegressionDesign {
    pub responses: DMatrix<f64>,
    pub regressors: DMatrix<f64>,
    pub layout: DesignLayout,
}

impl RegressionDesign {
    pub fn sample_count(&self) -> usize {
        self.responses.nrows()
    }
}

/// Regression rows for `t = τ+1, …, T−τ+1` (1-based), `T − 2τ + 1` rows in all.
pub fn build_single_design(traj: &Trajectory, tau: usize) -> Result<RegressionDesign> {
    if tau == 0 {
        return Err(SysIdError::invalid("tau must be positive"));
    }
    let len = traj.len();
    if len < 2 * tau {
        return Err(SysIdError::invalid(format!(
            "single-trajectory design with tau={tau} needs at least {} samples, got {len}",
            2 * tau
        )));
    }
    let (d_u, d_y) = (traj.input_dim(), traj.output_dim());
    let rows = len - 2 * tau + 1;
    let mut regressors = DMatrix::zeros(rows, tau * d_u);
    let mut responses = DMatrix::zeros(rows, tau * d_y);
    let (u, y) = (traj.inputs(), traj.outputs());
    for r in 0..rows {
        // 0-based time index of y_t is t0 = tau + r
        let t0 = tau + r;
        for k in 0..tau {
            regressors
                .view_mut((r, k * d_u), (1, d_u))
                .copy_from(&u.row(t0 - 1 - k));
            responses
                .view_mut((r, k * d_y), (1, d_y))
                .copy_from(&y.row(t0 + k));
        }
    }
    Ok(RegressionDesign {
        responses,
        regressors,
        layout: DesignLayout::Single { tau, d_u, d_y },
    })
}

/// One row per trajectory: `y_{2τ}` against `(u_{2τ−1}, …, u_1)`.
pub fn build_multi_design(trajectories: &[Trajectory], tau: usize) -> Result<RegressionDesign> {
    if tau == 0 {
        return Err(SysIdError::invalid("tau must be positive"));
    }
    let first = trajectories
        .first()
        .ok_or_else(|| SysIdError::invalid("multi-trajectory design needs at least one trajectory"))?;
    let (d_u, d_y) = (first.input_dim(), first.output_dim());
    let width = (2 * tau - 1) * d_u;
    let mut regressors = DMatrix::zeros(trajectories.len(), width);
    let mut responses = DMatrix::zeros(trajectories.len(), d_y);
    for (i, traj) in trajectories.iter().enumerate() {
        if traj.len() < 2 * tau {
            return Err(SysIdError::invalid(format!(
                "trajectory {i} has {} samples, needs {}",
                traj.len(),
                2 * tau
            )));
        }
        if traj.input_dim() != d_u || traj.output_dim() != d_y {
            return Err(SysIdError::invalid(format!("trajectory {i} has inconsistent dimensions")));
        }
        for k in 0..2 * tau - 1 {
            // block k holds u_{2τ−1−k} (1-based), row 2τ−2−k
            regressors
                .view_mut((i, k * d_u), (1, d_u))
                .copy_from(&traj.inputs().row(2 * tau - 2 - k));
        }
        responses.row_mut(i).copy_from(&traj.outputs().row(2 * tau - 1));
    }
    Ok(RegressionDesign {
        responses,
        regressors,
        layout: DesignLayout::Multi { tau, d_u, d_y },
    })
}

/// `argmin_M Σ ‖response_i − M regressor_i‖²` via the SVD of the regressor
/// matrix. Returns `M` with shape `responses.ncols() × regressors.ncols()`.
pub fn least_squares(design: &RegressionDesign) -> Result<DMatrix<f64>> {
    let x = &design.regressors;
    let columns = x.ncols();
    if x.nrows() != design.responses.nrows() {
        return Err(SysIdError::invalid("responses and regressors have different row counts"));
    }
    let f = lowrank::svd(x)?;
    let rank = f.numerical_rank(REGRESSOR_RANK_TOL);
    if rank < columns {
        return Err(SysIdError::IllPosedRegression { rank, columns });
    }
    // Mᵀ = V S⁻¹ Uᵀ Y
    let mut uty = f.left_vectors.transpose() * &design.responses;
    for (i, mut row) in uty.row_iter_mut().enumerate() {
        row /= f.singular_values[i];
    }
    Ok((&f.right_vectors * uty).transpose())
}

/// Unconstrained single-trajectory Hankel estimate.
pub fn lse_single(design: &RegressionDesign) -> Result<HankelMatrix> {
    let DesignLayout::Single { tau, d_u, d_y } = design.layout else {
        return Err(SysIdError::invalid("lse_single needs a single-trajectory design"));
    };
    HankelMatrix::new(least_squares(design)?, tau, d_u, d_y)
}

/// Least-squares estimate of `G_τ`.
pub fn lse_impulse(design: &RegressionDesign) -> Result<ImpulseBlockRow> {
    let DesignLayout::Multi { tau, d_u, d_y } = design.layout else {
        return Err(SysIdError::invalid("lse_multi needs a multi-trajectory design"));
    };
    ImpulseBlockRow::new(least_squares(design)?, tau, d_u, d_y)
}

/// Multi-trajectory Hankel estimate `H(Ĝ_τ)`.
pub fn lse_multi(design: &RegressionDesign) -> Result<HankelMatrix> {
    Ok(hankel_from_impulse(&lse_impulse(design)?))
}

/// Inputs of the threshold and sample-floor formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdParams {
    pub sigma_u: f64,
    pub sigma_z: f64,
    pub tau: usize,
    pub d_u: usize,
    pub d_y: usize,
    /// Failure probability δ.
    pub delta: f64,
    /// Total sample budget `T`.
    pub samples: usize,
    /// H∞ bound β, used by the single-trajectory formulas only.
    pub beta: Option<f64>,
}

impl ThresholdParams {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(SysIdError::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.samples == 0 {
            return Err(SysIdError::invalid("sample budget T must be at least 1"));
        }
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return Err(SysIdError::invalid("sigma_u must be positive"));
        }
        if !(self.sigma_z >= 0.0 && self.sigma_z.is_finite()) {
            return Err(SysIdError::invalid("sigma_z must be nonnegative"));
        }
        if self.tau == 0 || self.d_u == 0 || self.d_y == 0 {
            return Err(SysIdError::invalid("tau, d_u and d_y must be positive"));
        }
        Ok(())
    }

    fn beta(&self) -> Result<f64> {
        match self.beta {
            Some(b) if b >= 0.0 && b.is_finite() => Ok(b),
            Some(b) => Err(SysIdError::invalid(format!("beta must be nonnegative, got {b}"))),
            None => Err(SysIdError::invalid("single-trajectory formulas need beta")),
        }
    }

    fn log_inv_delta(&self) -> f64 {
        (1.0 / self.delta).ln()
    }

    /// `max(β²τ, σ_z²)/σ_u² · (d_yτ + d_u + log(1/δ))`
    fn single_scale(&self) -> Result<f64> {
        let beta = self.beta()?;
        let tau = self.tau as f64;
        let gain = (beta * beta * tau).max(self.sigma_z * self.sigma_z);
        Ok(gain / (self.sigma_u * self.sigma_u)
            * (self.d_y as f64 * tau + self.d_u as f64 + self.log_inv_delta()))
    }

    /// `σ_z²/σ_u² · τ min(d_y, τ)(τd_u + log(1/δ))`
    fn multi_scale(&self) -> f64 {
        let tau = self.tau as f64;
        let m = self.d_y.min(self.tau) as f64;
        (self.sigma_z / self.sigma_u).powi(2)
            * tau
            * m
            * (tau * self.d_u as f64 + self.log_inv_delta())
    }
}

/// Single-trajectory threshold
/// `ξ = 8 max(β√τ, σ_z)/σ_u · √((d_yτ + d_u + log(1/δ))/T)`.
pub fn threshold_single(p: &ThresholdParams) -> Result<f64> {
    p.validate()?;
    Ok(8.0 * (p.single_scale()? / p.samples as f64).sqrt())
}

/// Multi-trajectory threshold
/// `ξ = 4 σ_z/σ_u · √(τ min(d_y, τ)(τd_u + log(1/δ))/T)`.
pub fn threshold_multi(p: &ThresholdParams) -> Result<f64> {
    p.validate()?;
    Ok(4.0 * (p.multi_scale() / p.samples as f64).sqrt())
}

/// Sample-size floors, reported without their universal constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleFloors {
    /// Floor for the least-squares concentration bound.
    pub t0: f64,
    /// Floor for exact order recovery.
    pub t1: f64,
    /// Floor for the Markov parameter error bound.
    pub t2: f64,
}

fn check_singular(s: f64, name: &str) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(SysIdError::invalid(format!("{name} must be positive, got {s}")));
    }
    Ok(())
}

pub fn sample_floors_single(p: &ThresholdParams, s_n_h: f64, s_n_h_right: f64) -> Result<SampleFloors> {
    p.validate()?;
    check_singular(s_n_h, "s_n(H)")?;
    check_singular(s_n_h_right, "s_n(H→)")?;
    let tau = p.tau as f64;
    let du2 = (p.d_u * p.d_u) as f64;
    let t0 = tau * tau.ln().powi(2) * (du2 * (du2 / p.delta).ln().powi(2) + tau.ln());
    let scale = p.single_scale()?;
    Ok(SampleFloors {
        t0,
        t1: scale / (s_n_h * s_n_h),
        t2: scale / (s_n_h_right * s_n_h_right),
    })
}

pub fn sample_floors_multi(p: &ThresholdParams, s_n_h: f64, s_n_h_right: f64) -> Result<SampleFloors> {
    p.validate()?;
    check_singular(s_n_h, "s_n(H)")?;
    check_singular(s_n_h_right, "s_n(H→)")?;
    let tau = p.tau as f64;
    let t0 = tau * (p.log_inv_delta() + ((2 * p.tau - 1) * p.d_u) as f64);
    let scale = p.multi_scale();
    Ok(SampleFloors {
        t0,
        t1: scale / (s_n_h * s_n_h),
        t2: scale / (s_n_h_right * s_n_h_right),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{simulate_trajectory, NoiseSpec, StateSpaceSystem};
    use crate::seed::RandomSeed;
    use approx::assert_abs_diff_eq;

    fn params() -> ThresholdParams {
        ThresholdParams {
            sigma_u: 1.0,
            sigma_z: 0.1,
            tau: 6,
            d_u: 3,
            d_y: 2,
            delta: 0.05,
            samples: 5000,
            beta: Some(1.0),
        }
    }

    fn delay() -> StateSpaceSystem {
        StateSpaceSystem::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn single_design_row_count() {
        let sys = delay();
        let noise = NoiseSpec::new(1.0, 0.0).unwrap();
        let tau = 3;
        let traj = simulate_trajectory(&sys, noise, 2 * tau, RandomSeed(1)).unwrap();
        assert_eq!(build_single_design(&traj, tau).unwrap().sample_count(), 1);
        let traj = simulate_trajectory(&sys, noise, 2 * tau + 1, RandomSeed(1)).unwrap();
        assert_eq!(build_single_design(&traj, tau).unwrap().sample_count(), 2);
        let traj = simulate_trajectory(&sys, noise, 2 * tau - 1, RandomSeed(1)).unwrap();
        assert!(matches!(build_single_design(&traj, tau), Err(SysIdError::InvalidArgument(_))));
    }

    #[test]
    fn single_design_delay_identity() {
        let traj = simulate_trajectory(&delay(), NoiseSpec::new(1.0, 0.0).unwrap(), 30, RandomSeed(2)).unwrap();
        let d = build_single_design(&traj, 1).unwrap();
        assert_eq!(d.responses, d.regressors);
    }

    #[test]
    fn multi_design_reverse_order() {
        let sys = StateSpaceSystem::random(2, 2, 1, RandomSeed(3)).unwrap();
        let tau = 3;
        let trajs: Vec<_> = (0..4)
            .map(|i| simulate_trajectory(&sys, NoiseSpec::new(1.0, 0.0).unwrap(), 2 * tau, RandomSeed(i)).unwrap())
            .collect();
        let d = build_multi_design(&trajs, tau).unwrap();
        assert_eq!(d.sample_count(), 4);
        for (i, traj) in trajs.iter().enumerate() {
            for k in 1..=2 * tau - 1 {
                // block k (1-based) equals u_{2τ−k}
                let block = d.regressors.view((i, (k - 1) * 2), (1, 2)).into_owned();
                assert_eq!(block, traj.inputs().row(2 * tau - k - 1).into_owned());
            }
        }
        let short = simulate_trajectory(&sys, NoiseSpec::new(1.0, 0.0).unwrap(), 2 * tau - 1, RandomSeed(0)).unwrap();
        assert!(build_multi_design(&[short], tau).is_err());
        assert!(build_multi_design(&[], tau).is_err());
    }

    #[test]
    fn scalar_ratio_estimator() {
        let design = RegressionDesign {
            responses: DMatrix::from_element(1, 1, 3.0),
            regressors: DMatrix::from_element(1, 1, 2.0),
            layout: DesignLayout::Single { tau: 1, d_u: 1, d_y: 1 },
        };
        let h = lse_single(&design).unwrap();
        assert_abs_diff_eq!(h.data()[(0, 0)], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_responses_give_zero_estimates() {
        let sys = StateSpaceSystem::random(2, 2, 2, RandomSeed(5)).unwrap();
        let traj = simulate_trajectory(&sys, NoiseSpec::new(1.0, 0.0).unwrap(), 200, RandomSeed(5)).unwrap();
        let mut d = build_single_design(&traj, 3).unwrap();
        d.responses.fill(0.0);
        assert!(lse_single(&d).unwrap().data().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        let design = RegressionDesign {
            responses: DMatrix::zeros(2, 1),
            regressors: DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]),
            layout: DesignLayout::Multi { tau: 2, d_u: 1, d_y: 1 },
        };
        match lse_multi(&design) {
            Err(SysIdError::IllPosedRegression { rank, columns }) => {
                assert_eq!((rank, columns), (1, 3));
            }
            other => panic!("expected ill-posed regression, got {other:?}"),
        }
        assert!(lse_single(&design).is_err());
    }

    #[test]
    fn threshold_single_arithmetic() {
        let p = ThresholdParams {
            sigma_u: 1.0,
            sigma_z: 1.0,
            tau: 1,
            d_u: 1,
            d_y: 1,
            delta: (-1.0f64).exp(),
            samples: 3,
            beta: Some(1.0),
        };
        assert_abs_diff_eq!(threshold_single(&p).unwrap(), 8.0, epsilon = 1e-12);
        let quad = ThresholdParams { samples: 12, ..p };
        assert_abs_diff_eq!(threshold_single(&quad).unwrap(), 4.0, epsilon = 1e-12);
        // σ_z below β√τ leaves ξ unchanged
        let a = ThresholdParams { tau: 4, beta: Some(1.0), sigma_z: 0.5, ..p };
        let b = ThresholdParams { sigma_z: 1.9, ..a };
        assert_eq!(threshold_single(&a).unwrap(), threshold_single(&b).unwrap());
        assert!(threshold_single(&ThresholdParams { beta: None, ..p }).is_err());
        assert!(threshold_single(&ThresholdParams { delta: 1.0, ..p }).is_err());
        assert!(threshold_single(&ThresholdParams { delta: 0.0, ..p }).is_err());
    }

    #[test]
    fn threshold_multi_arithmetic() {
        let xi = threshold_multi(&params()).unwrap();
        let expected = 0.4 * (6.0 * 2.0 * (18.0 + 20f64.ln()) / 5000.0).sqrt();
        assert_abs_diff_eq!(xi, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(xi, 0.0898, epsilon = 5e-5);
        assert_eq!(threshold_multi(&ThresholdParams { sigma_z: 0.0, ..params() }).unwrap(), 0.0);
        // at d_y = τ both branches of min(d_y, τ) agree
        let p = ThresholdParams { d_y: 6, ..params() };
        let q = ThresholdParams { d_y: 7, ..params() };
        assert_eq!(threshold_multi(&p).unwrap(), threshold_multi(&q).unwrap());
        assert!(threshold_multi(&ThresholdParams { samples: 0, ..params() }).is_err());
    }

    #[test]
    fn multi_floors() {
        let f = sample_floors_multi(&params(), 0.5, 0.3).unwrap();
        assert_abs_diff_eq!(f.t0, 6.0 * (20f64.ln() + 33.0), epsilon = 1e-12);
        assert_abs_diff_eq!(f.t0, 215.97, epsilon = 0.01);
        assert!(f.t2 >= f.t1);
        let g = sample_floors_multi(&ThresholdParams { d_u: 4, ..params() }, 0.5, 0.3).unwrap();
        assert_abs_diff_eq!(g.t0 - f.t0, 6.0 * 11.0, epsilon = 1e-12);
        let tight = sample_floors_multi(&ThresholdParams { delta: 0.01, ..params() }, 0.5, 0.3).unwrap();
        assert!(tight.t0 > f.t0 && tight.t1 > f.t1 && tight.t2 > f.t2);
        assert!(sample_floors_multi(&params(), 0.0, 0.3).is_err());
    }

    #[test]
    fn single_floors() {
        let f = sample_floors_single(&params(), 0.5, 0.3).unwrap();
        assert!(f.t2 >= f.t1);
        let tight = sample_floors_single(&ThresholdParams { delta: 0.01, ..params() }, 0.5, 0.3).unwrap();
        assert!(tight.t0 > f.t0 && tight.t1 > f.t1 && tight.t2 > f.t2);
        let one = sample_floors_single(&ThresholdParams { tau: 1, ..params() }, 0.5, 0.3).unwrap();
        assert_eq!(one.t0, 0.0);
    }
}
