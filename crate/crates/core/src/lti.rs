//! Discrete-time LTI systems driven by Gaussian inputs.
//!
//! ```text
//! x[t+1] = A x[t] + B u[t]
//! y[t]   = C x[t] + z[t]
//! ```
//!
//! with `x[1] = 0`, `u[t] ~ N(0, σ_u² I)` and `z[t] ~ N(0, σ_z² I)`.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::seed::{RandomSeed, INPUT_STREAM, NOISE_STREAM};

/// Default number of frequency points for [`StateSpaceSystem::hinf_norm`].
pub const DEFAULT_HINF_GRID: usize = 4096;

const EIG_EPS: f64 = 1e-14;
const EIG_MAX_ITER: usize = 10_000;

/// A state-space model `(A, B, C)` with no feedthrough term.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl StateSpaceSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
            return Err(SysIdError::invalid("n, d_u and d_y must be positive"));
        }
        if a.ncols() != n {
            return Err(SysIdError::invalid(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(SysIdError::invalid(format!(
                "B must have {n} rows, got {}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(SysIdError::invalid(format!(
                "C must have {n} columns, got {}",
                c.ncols()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(SysIdError::invalid("system matrices must be finite"));
        }
        Ok(Self { a, b, c })
    }

    /// Random test system: `A` diagonal with i.i.d. `U(0.1, 0.9)` entries,
    /// `B` and `C` with i.i.d. `N(0, 2²)` entries.
    pub fn random(n: usize, d_u: usize, d_y: usize, seed: RandomSeed) -> Result<Self> {
        if n == 0 || d_u == 0 || d_y == 0 {
            return Err(SysIdError::invalid("n, d_u and d_y must be positive"));
        }
        let mut rng = seed.rng(0);
        let uniform = Uniform::new(0.1, 0.9).expect("valid range");
        let gauss = Normal::new(0.0, 2.0).expect("valid std");
        let diag: Vec<f64> = (0..n).map(|_| uniform.sample(&mut rng)).collect();
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        let b = DMatrix::from_row_iterator(n, d_u, (0..n * d_u).map(|_| gauss.sample(&mut rng)));
        let c = DMatrix::from_row_iterator(d_y, n, (0..d_y * n).map(|_| gauss.sample(&mut rng)));
        Self::new(a, b, c)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension `n`.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Markov parameter `C A^k B`.
    pub fn markov_parameter(&self, k: usize) -> DMatrix<f64> {
        let mut akb = self.b.clone();
        for _ in 0..k {
            akb = &self.a * akb;
        }
        &self.c * akb
    }

    /// The first `count` Markov parameters `CB, CAB, …, CA^{count-1}B`.
    pub fn markov_parameters(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut akb = self.b.clone();
        for k in 0..count {
            if k > 0 {
                akb = &self.a * akb;
            }
            out.push(&self.c * &akb);
        }
        out
    }

    /// Largest eigenvalue modulus of `A`.
    pub fn spectral_radius(&self) -> Result<f64> {
        spectral_radius(&self.a)
    }

    /// Grid approximation of the H∞ norm.
    ///
    /// Evaluates `σ_max(C (e^{iω} I − A)^{-1} B)` on `grid_size` equally spaced
    /// frequencies `ω_k = kπ/(grid_size − 1)` covering `[0, π]` and returns the
    /// largest value. The result never exceeds the true norm. Grids of sizes
    /// `g` and `2g − 1` are nested, so refining that way never lowers it.
    pub fn hinf_norm(&self, grid_size: usize) -> Result<f64> {
        if grid_size == 0 {
            return Err(SysIdError::invalid("grid_size must be positive"));
        }
        let rho = self.spectral_radius()?;
        if rho >= 1.0 {
            return Err(SysIdError::invalid(format!(
                "H-infinity norm requires a stable system, spectral radius is {rho}"
            )));
        }
        let n = self.order();
        let a_c = self.a.map(|v| Complex::new(-v, 0.0));
        let b_c = self.b.map(|v| Complex::new(v, 0.0));
        let c_c = self.c.map(|v| Complex::new(v, 0.0));
        let mut best = 0.0f64;
        for k in 0..grid_size {
            let omega = if grid_size == 1 {
                0.0
            } else {
                std::f64::consts::PI * k as f64 / (grid_size - 1) as f64
            };
            let z = Complex::from_polar(1.0, omega);
            let mut resolvent = a_c.clone();
            for i in 0..n {
                resolvent[(i, i)] += z;
            }
            let x = resolvent.lu().solve(&b_c).ok_or_else(|| {
                SysIdError::numerical(format!("singular resolvent at omega = {omega}"))
            })?;
            let g = &c_c * x;
            let sv = faer::Mat::<faer::c64>::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)])
                .singular_values()
                .map_err(|e| SysIdError::numerical(format!("SVD of transfer matrix failed: {e:?}")))?;
            best = sv.into_iter().fold(best, f64::max);
        }
        Ok(best)
    }

    /// Noiseless response to an input sequence (one row per time step).
    pub fn respond(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(SysIdError::invalid(format!(
                "inputs have {} columns, system expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        let len = inputs.nrows();
        let mut outputs = DMatrix::zeros(len, self.output_dim());
        let mut x = nalgebra::DVector::zeros(self.order());
        for t in 0..len {
            let y = &self.c * &x;
            outputs.row_mut(t).copy_from(&y.transpose());
            let u = inputs.row(t).transpose();
            x = &self.a * x + &self.b * u;
        }
        Ok(outputs)
    }
}

/// Largest eigenvalue modulus of a square matrix (real Schur form).
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(SysIdError::invalid("spectral radius needs a square matrix"));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let schur = nalgebra::Schur::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| SysIdError::numerical("eigenvalue iteration did not converge"))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// Input and observation-noise standard deviations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_u: f64,
    pub sigma_z: f64,
}

impl NoiseSpec {
    pub fn new(sigma_u: f64, sigma_z: f64) -> Result<Self> {
        if !(sigma_u >= 0.0 && sigma_u.is_finite() && sigma_z >= 0.0 && sigma_z.is_finite()) {
            return Err(SysIdError::invalid(format!(
                "noise levels must be finite and nonnegative, got sigma_u={sigma_u}, sigma_z={sigma_z}"
            )));
        }
        Ok(Self { sigma_u, sigma_z })
    }
}

/// Input/output record of one run. Row `k` holds `u_{k+1}` and `y_{k+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    inputs: DMatrix<f64>,
    outputs: DMatrix<f64>,
}

impl Trajectory {
    pub fn new(inputs: DMatrix<f64>, outputs: DMatrix<f64>) -> Result<Self> {
        if inputs.nrows() != outputs.nrows() {
            return Err(SysIdError::invalid(format!(
                "trajectory has {} inputs but {} outputs",
                inputs.nrows(),
                outputs.nrows()
            )));
        }
        if inputs.ncols() == 0 || outputs.ncols() == 0 {
            return Err(SysIdError::invalid("input and output dimensions must be positive"));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_row_iterator(
        rows,
        cols,
        (0..rows * cols).map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            scale * v
        }),
    )
}

/// Simulate `length` steps from `x_1 = 0`.
///
/// Inputs and noise come from separate substreams of `seed`, so the input
/// path does not depend on `sigma_z`.
pub fn simulate_trajectory(
    system: &StateSpaceSystem,
    noise: NoiseSpec,
    length: usize,
    seed: RandomSeed,
) -> Result<Trajectory> {
    if length == 0 {
        return Err(SysIdError::invalid("trajectory length must be at least 1"));
    }
    let inputs = gaussian_matrix(&mut seed.rng(INPUT_STREAM), length, system.input_dim(), noise.sigma_u);
    let mut outputs = system.respond(&inputs)?;
    if noise.sigma_z > 0.0 {
        outputs += gaussian_matrix(&mut seed.rng(NOISE_STREAM), length, system.output_dim(), noise.sigma_z);
    }
    Trajectory::new(inputs, outputs)
}
