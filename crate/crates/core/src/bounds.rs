//! Randomized checks of the thresholding guarantees.
//!
//! Each instance is `Ĥ = H + Z` with `H = X Yᵀ` of rank `n` (Gaussian
//! factors) and Gaussian `Z` rescaled so that `‖Z‖₂ = c · s_n(H)` with
//! `c ~ U(0.01, 0.5)`. This covers both `k_ξ = n` and `k_ξ < n` regimes for
//! thresholds `ξ ∈ {2, 3, 4} · ‖Z‖₂`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::lowrank;
use crate::metrics::prop1_bound;
use crate::seed::RandomSeed;

/// Threshold multipliers applied to `‖Z‖₂`.
pub const XI_MULTIPLIERS: [f64; 3] = [2.0, 3.0, 4.0];

#[derive(Clone, Debug)]
pub struct BoundInstance {
    /// Rank of `signal`.
    pub rank: usize,
    pub signal: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    /// Singular values of `signal`, decreasing.
    pub signal_singular_values: Vec<f64>,
    pub noise_norm: f64,
}

fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

impl BoundInstance {
    pub fn random(seed: RandomSeed) -> Result<Self> {
        let mut rng = seed.rng(0);
        let rank = rng.random_range(1..=5usize);
        let rows = rank + rng.random_range(1..=6usize);
        let cols = rank + rng.random_range(1..=6usize);
        let x = gaussian(&mut rng, rows, rank);
        let y = gaussian(&mut rng, cols, rank);
        let signal = x * y.transpose();
        let s = lowrank::singular_values(&signal)?;
        let scale: f64 = rng.random_range(0.01..0.5);
        let raw = gaussian(&mut rng, rows, cols);
        let raw_norm = lowrank::operator_norm(&raw)?;
        let noise = raw * (scale * s[rank - 1] / raw_norm);
        let noise_norm = lowrank::operator_norm(&noise)?;
        Ok(Self {
            rank,
            signal,
            noise,
            signal_singular_values: s.iter().copied().collect(),
            noise_norm,
        })
    }

    pub fn observed(&self) -> DMatrix<f64> {
        &self.signal + &self.noise
    }

    /// Both inequalities of the thresholding error bound: the rank-k bound
    /// for every `k ≤ n`, and the adaptive bound for every multiplier.
    pub fn check_prop1(&self) -> Result<bool> {
        let observed = self.observed();
        let f = lowrank::svd(&observed)?;
        let z2 = self.noise_norm * self.noise_norm;
        let s = &self.signal_singular_values;
        for k in 0..=self.rank {
            let err = (f.truncated(k) - &self.signal).norm_squared();
            let tail: f64 = s[k..self.rank].iter().map(|v| v * v).sum();
            if err > 18.0 * (k as f64 * z2 + tail) {
                return Ok(false);
            }
        }
        for m in XI_MULTIPLIERS {
            let xi = m * self.noise_norm;
            let t = lowrank::hard_threshold_factored(&f, xi)?;
            let err = (t.matrix - &self.signal).norm_squared();
            if err > prop1_bound(s, self.rank, xi)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Effective rank never exceeds `n`, and equals `n` once `ξ ≤ 2 s_n / 3`.
    pub fn check_lemma1(&self) -> Result<bool> {
        let f = lowrank::svd(&self.observed())?;
        let s_n = self.signal_singular_values[self.rank - 1];
        for m in XI_MULTIPLIERS {
            let xi = m * self.noise_norm;
            let k = lowrank::hard_threshold_factored(&f, xi)?.effective_rank;
            if k > self.rank || (xi <= 2.0 / 3.0 * s_n && k != self.rank) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `|s_i(H + Z) − s_i(H)| ≤ ‖Z‖₂` for all `i`.
    pub fn check_weyl(&self) -> Result<bool> {
        let observed = lowrank::singular_values(&self.observed())?;
        Ok(observed
            .iter()
            .zip(&self.signal_singular_values)
            .all(|(a, b)| (a - b).abs() <= self.noise_norm * (1.0 + 1e-10) + 1e-12))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundSuiteReport {
    pub instances: usize,
    pub prop1_passed: usize,
    pub lemma1_passed: usize,
}

impl std::fmt::Display for BoundSuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "prop1: {}/{}, lemma1: {}/{}",
            self.prop1_passed, self.instances, self.lemma1_passed, self.instances
        )
    }
}

/// Instance `i` uses `seed.derive(i)`.
pub fn run_bound_suite(instances: usize, seed: RandomSeed) -> Result<BoundSuiteReport> {
    let mut report = BoundSuiteReport {
        instances,
        prop1_passed: 0,
        lemma1_passed: 0,
    };
    for i in 0..instances {
        let inst = BoundInstance::random(seed.derive(i as u64))?;
        report.prop1_passed += inst.check_prop1()? as usize;
        report.lemma1_passed += inst.check_lemma1()? as usize;
    }
    Ok(report)
}
