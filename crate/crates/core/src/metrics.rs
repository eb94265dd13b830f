//! Error functionals, theoretical bound evaluators and per-trial records.
//!
//! Everything here that takes ground-truth quantities (`s(H)`, `n`, the true
//! system) is a diagnostic; the estimation path never calls into it.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::hankel::{HankelMatrix, HANKEL_RANK_TOL};
use crate::hokalman::{IdentificationResult, Realization};
use crate::lowrank;
use crate::lti::StateSpaceSystem;

fn check_shapes(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<()> {
    if m1.shape() != m2.shape() {
        return Err(SysIdError::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            m1.shape(),
            m2.shape()
        )));
    }
    Ok(())
}

/// `‖M1 − M2‖_F`
pub fn frobenius_error(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64> {
    check_shapes(m1, m2)?;
    Ok((m1 - m2).norm())
}

/// `‖M1 − M2‖₂`
pub fn operator_error(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64> {
    check_shapes(m1, m2)?;
    lowrank::operator_norm(&(m1 - m2))
}

/// `‖Ĉ Â^k B̂ − C A^k B‖_F` for `k = 0..horizon`.
pub fn realization_markov_error(
    realization: &Realization,
    system: &StateSpaceSystem,
    horizon: usize,
) -> Result<Vec<f64>> {
    if realization.b.ncols() != system.input_dim() || realization.c.nrows() != system.output_dim() {
        return Err(SysIdError::invalid("realization and system have different input/output sizes"));
    }
    let truth = system.markov_parameters(horizon);
    let mut akb = realization.b.clone();
    let mut out = Vec::with_capacity(horizon);
    for (k, g) in truth.iter().enumerate() {
        if k > 0 {
            akb = &realization.a * akb;
        }
        out.push((&realization.c * &akb - g).norm());
    }
    Ok(out)
}

/// Markov parameter errors of an identification result. An empty
/// realization predicts zero, so entry `k` is then `‖CA^kB‖_F`.
pub fn markov_error(result: &IdentificationResult, system: &StateSpaceSystem, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(SysIdError::invalid("horizon must be positive"));
    }
    realization_markov_error(&result.realization, system, horizon)
}

/// `18 min_{k=0..n} (4kξ² + Σ_{i=k+1}^{n} s_i²)`
pub fn prop1_bound(singular_values: &[f64], n: usize, xi: f64) -> Result<f64> {
    if n > singular_values.len() {
        return Err(SysIdError::invalid(format!(
            "order {n} exceeds the {} singular values supplied",
            singular_values.len()
        )));
    }
    let best = (0..=n)
        .map(|k| {
            let tail: f64 = singular_values[k..n].iter().map(|s| s * s).sum();
            4.0 * k as f64 * xi * xi + tail
        })
        .fold(f64::INFINITY, f64::min);
    Ok(18.0 * best)
}

/// Right-hand sides of the realization error bounds,
/// `50‖H‖₂ ε / s_n²(H→)` for `A` and `√5 ε / √s_n(H→)` for `B` and `C`,
/// where `ε = ‖Ĥ(ξ) − H‖_F` and `n` is the numerical rank of `H`.
pub fn thm_param_bounds(h: &HankelMatrix, fro_err: f64) -> Result<(f64, f64)> {
    let s = lowrank::singular_values(h.data())?;
    let s1 = s.iter().copied().fold(0.0, f64::max);
    let n = s.iter().filter(|&&x| s1 > 0.0 && x > HANKEL_RANK_TOL * s1).count();
    if n == 0 {
        return Err(SysIdError::invalid("Hankel matrix has numerical rank 0"));
    }
    let right = lowrank::singular_values(&h.drop_last_block_column()?)?;
    let s_n_right = right.get(n - 1).copied().unwrap_or(0.0);
    if s_n_right <= 0.0 {
        return Err(SysIdError::invalid("H→ has rank below n"));
    }
    let a_bound = 50.0 * s1 * fro_err / (s_n_right * s_n_right);
    let bc_bound = 5f64.sqrt() * fro_err / s_n_right.sqrt();
    Ok((a_bound, bc_bound))
}

/// One Monte-Carlo trial. Metric fields are empty for failed trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// `ok` or `failed:<reason>`.
    pub status: String,
    #[serde(rename = "T")]
    pub samples: usize,
    pub trial: usize,
    pub xi: Option<f64>,
    pub order_estimate: Option<usize>,
    pub hankel_op_error: Option<f64>,
    pub hankel_fro_error_thresholded: Option<f64>,
    pub markov_cab_error: Option<f64>,
    pub oracle_cab_error: Option<f64>,
    pub bound_rhs_prop1: Option<f64>,
}

impl TrialRecord {
    pub fn failed(samples: usize, trial: usize, reason: &str) -> Self {
        Self {
            status: format!("failed:{}", reason.replace([',', '\n', '"'], " ")),
            samples,
            trial,
            xi: None,
            order_estimate: None,
            hankel_op_error: None,
            hankel_fro_error_thresholded: None,
            markov_cab_error: None,
            oracle_cab_error: None,
            bound_rhs_prop1: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const TRIAL_CSV_HEADER: &str = "status,T,trial,xi,order_estimate,hankel_op_error,hankel_fro_error_thresholded,markov_cab_error,oracle_cab_error,bound_rhs_prop1";

pub fn write_records<W: Write>(writer: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRIAL_CSV_HEADER {
        return Err(SysIdError::invalid("unexpected trial CSV header"));
    }
    r.deserialize().map(|rec| rec.map_err(SysIdError::from)).collect()
}

/// Median of finite values; `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
