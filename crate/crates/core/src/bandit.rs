//! Base bandit solvers.
//!
//! The reference solver is GP-UCB with a finite-dimensional (primal)
//! posterior. The kernel weight `w = 1/|Ĵ|` of an estimate is folded into the
//! features as a `√w` scaling, so `φᵀφ = k̂(x, x)` holds exactly and the
//! posterior is the feature-space form of kernel ridge regression:
//!
//! ```text
//! A = λ²I + Σ φφᵀ,   b = Σ φy,   μ(x) = φᵀA⁻¹b,   σ²(x) = λ² φᵀA⁻¹φ
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{FeatureTable, KernelEstimate};
use crate::linalg;

/// A bandit policy over a finite candidate set.
///
/// The lifelong wrappers depend on nothing else: a solver is built for a kernel
/// estimate by a factory closure, asked for actions and told rewards.
pub trait BaseSolver {
    /// Index of the next candidate to play.
    fn select(&mut self) -> usize;
    /// Records the reward observed at `candidate`.
    fn observe(&mut self, candidate: usize, reward: f64) -> Result<()>;
}

/// Builds a fresh base solver for one task.
pub trait SolverFactory {
    type Solver<'t>: BaseSolver
    where
        Self: 't;

    fn build<'t>(
        &'t self,
        table: &'t FeatureTable,
        estimate: &KernelEstimate,
    ) -> Result<Self::Solver<'t>>;
}

impl SolverFactory for UcbConfig {
    type Solver<'t> = GpUcb<'t>;

    fn build<'t>(
        &'t self,
        table: &'t FeatureTable,
        estimate: &KernelEstimate,
    ) -> Result<GpUcb<'t>> {
        GpUcb::new(table, estimate, *self)
    }
}

/// Exploration coefficient `ν_i` of the UCB rule.
#[derive(Debug, Clone, Copy)]
pub enum ExplorationCoefficient {
    Constant(f64),
    /// `ν_i` as a function of the 1-based step index.
    Schedule(fn(usize) -> f64),
}

#[derive(Debug, Clone, Copy)]
pub struct UcbConfig {
    pub nu: ExplorationCoefficient,
    pub lambda_ucb: f64,
    /// Candidate points per axis of the acquisition grid.
    pub grid_resolution: usize,
}

impl Default for UcbConfig {
    fn default() -> Self {
        UcbConfig {
            nu: ExplorationCoefficient::Constant(10.0),
            lambda_ucb: 0.1,
            grid_resolution: 500,
        }
    }
}

impl UcbConfig {
    pub fn validate(&self) -> Result<()> {
        if let ExplorationCoefficient::Constant(nu) = self.nu {
            if !(nu >= 0.0 && nu.is_finite()) {
                return Err(crate::error::config_error(
                    "ν must be finite and nonnegative",
                ));
            }
        }
        if !(self.lambda_ucb > 0.0 && self.lambda_ucb.is_finite()) {
            return Err(crate::error::config_error("λ_ucb must be positive"));
        }
        if self.grid_resolution < 2 {
            return Err(crate::error::config_error(
                "grid resolution must be at least 2",
            ));
        }
        Ok(())
    }

    pub fn nu_at(&self, step: usize) -> f64 {
        match self.nu {
            ExplorationCoefficient::Constant(nu) => nu,
            ExplorationCoefficient::Schedule(f) => f(step),
        }
    }
}

/// `λ_ucb = 1 + 2/n`, the regularizer used by the regret analysis.
pub fn theoretical_lambda_ucb(horizon: usize) -> f64 {
    1.0 + 2.0 / horizon as f64
}

/// Primal GP posterior over a `dim`-dimensional feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    dim: usize,
    lambda_ucb: f64,
    precision: Vec<f64>,
    moment: Vec<f64>,
    count: usize,
    factor: Vec<f64>,
    whitened_moment: Vec<f64>,
}

impl PosteriorState {
    pub fn new(dim: usize, lambda_ucb: f64) -> Self {
        let reg = lambda_ucb * lambda_ucb;
        let mut precision = vec![0.0; dim * dim];
        let mut factor = vec![0.0; dim * dim];
        for i in 0..dim {
            precision[i * dim + i] = reg;
            factor[i * dim + i] = lambda_ucb;
        }
        PosteriorState {
            dim,
            lambda_ucb,
            precision,
            moment: vec![0.0; dim],
            count: 0,
            factor,
            whitened_moment: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda_ucb(&self) -> f64 {
        self.lambda_ucb
    }

    /// `A = λ²I + Σ φφᵀ`, row-major.
    pub fn precision(&self) -> &[f64] {
        &self.precision
    }

    /// `b = Σ φy`.
    pub fn moment(&self) -> &[f64] {
        &self.moment
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `A += φφᵀ`, `b += φy`.
    pub fn observe(&mut self, phi: &[f64], y: f64) -> Result<()> {
        let d = self.dim;
        if phi.len() != d {
            return Err(Error::Shape {
                expected: d,
                found: phi.len(),
            });
        }
        if !y.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        for i in 0..d {
            for j in 0..d {
                self.precision[i * d + j] += phi[i] * phi[j];
            }
            self.moment[i] += phi[i] * y;
        }
        self.count += 1;
        self.factor = linalg::cholesky(&self.precision, d)?;
        self.whitened_moment.copy_from_slice(&self.moment);
        linalg::forward_substitute(&self.factor, d, &mut self.whitened_moment);
        Ok(())
    }

    /// Posterior mean and variance at a (√w-scaled) feature vector.
    pub fn posterior_mean_var(&self, phi: &[f64]) -> Result<(f64, f64)> {
        if phi.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                found: phi.len(),
            });
        }
        let mut z = phi.to_vec();
        Ok(self.mean_var_in(&mut z))
    }

    /// Same as [`posterior_mean_var`](Self::posterior_mean_var), using `z`
    /// (holding `φ`) as scratch.
    fn mean_var_in(&self, z: &mut [f64]) -> (f64, f64) {
        linalg::forward_substitute(&self.factor, self.dim, z);
        let mean = linalg::dot(z, &self.whitened_moment);
        let var = self.lambda_ucb * self.lambda_ucb * linalg::dot(z, z);
        (mean, var.max(0.0))
    }

    /// `(1/2) log det(I + λ⁻²K_t)` for the observed points, via
    /// `det(I + λ⁻²ΦΦᵀ) = det(A)/λ^{2d}`.
    pub fn realized_info_gain(&self) -> f64 {
        let reg = self.lambda_ucb * self.lambda_ucb;
        0.5 * (linalg::log_det(&self.factor, self.dim) - self.dim as f64 * libm::log(reg))
    }
}

/// `(1/2) d log(1 + λ⁻² n / d)`, the maximum information gain bound of a
/// `d`-dimensional feature kernel; zero for `n = 0`.
pub fn info_gain_bound(feature_dim: usize, n: usize, lambda_ucb: f64) -> f64 {
    if n == 0 || feature_dim == 0 {
        return 0.0;
    }
    let d = feature_dim as f64;
    0.5 * d * libm::log1p(n as f64 / (lambda_ucb * lambda_ucb * d))
}

/// `(1/2) log det(I + λ⁻²K)` for a row-major `t × t` Gram matrix.
///
/// Fails when `K` has an eigenvalue below `−1e−8`.
pub fn realized_info_gain(gram: &[f64], t: usize, lambda_ucb: f64) -> Result<f64> {
    if gram.len() != t * t {
        return Err(Error::Shape {
            expected: t * t,
            found: gram.len(),
        });
    }
    if t == 0 {
        return Ok(0.0);
    }
    let mut shifted = gram.to_vec();
    for i in 0..t {
        shifted[i * t + i] += 1e-8;
    }
    linalg::cholesky(&shifted, t)?;
    let inv = 1.0 / (lambda_ucb * lambda_ucb);
    let mut m: Vec<f64> = gram.iter().map(|k| k * inv).collect();
    for i in 0..t {
        m[i * t + i] += 1.0;
    }
    let l = linalg::cholesky(&m, t)?;
    Ok(0.5 * linalg::log_det(&l, t))
}

/// GP-UCB over the candidates of a feature table.
#[derive(Debug, Clone)]
pub struct GpUcb<'a> {
    table: &'a FeatureTable,
    columns: Vec<usize>,
    scale: f64,
    projected: Vec<f64>,
    state: PosteriorState,
    config: UcbConfig,
}

impl<'a> GpUcb<'a> {
    pub fn new(
        table: &'a FeatureTable,
        estimate: &KernelEstimate,
        config: UcbConfig,
    ) -> Result<Self> {
        config.validate()?;
        if table.is_empty() {
            return Err(crate::error::config_error("candidate set is empty"));
        }
        if estimate.num_groups() != table.num_groups() {
            return Err(Error::Shape {
                expected: table.num_groups(),
                found: estimate.num_groups(),
            });
        }
        let weight = estimate.weight().ok_or(Error::EmptyKernel)?;
        let scale = libm::sqrt(weight);
        let columns = estimate.active_columns(table.offsets());
        let k = columns.len();
        let mut projected = vec![0.0; table.len() * k];
        for i in 0..table.len() {
            let row = table.row(i);
            for (c, &col) in columns.iter().enumerate() {
                projected[i * k + c] = scale * row[col];
            }
        }
        Ok(GpUcb {
            table,
            columns,
            scale,
            projected,
            state: PosteriorState::new(k, config.lambda_ucb),
            config,
        })
    }

    /// Scaled selected features `√w φ_Ĵ(x)` of a candidate.
    pub fn features(&self, candidate: usize) -> &[f64] {
        let k = self.columns.len();
        &self.projected[candidate * k..(candidate + 1) * k]
    }

    pub fn feature_scale(&self) -> f64 {
        self.scale
    }

    pub fn state(&self) -> &PosteriorState {
        &self.state
    }

    pub fn table(&self) -> &FeatureTable {
        self.table
    }

    /// `μ(x) + ν σ(x)` for every candidate.
    pub fn ucb_scores(&self) -> Vec<f64> {
        let nu = self.config.nu_at(self.state.count() + 1);
        let mut z = vec![0.0; self.columns.len()];
        (0..self.table.len())
            .map(|i| {
                z.copy_from_slice(self.features(i));
                let (mean, var) = self.state.mean_var_in(&mut z);
                mean + nu * libm::sqrt(var)
            })
            .collect()
    }
}

impl BaseSolver for GpUcb<'_> {
    /// Grid argmax of the UCB; ties go to the lowest index.
    fn select(&mut self) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, score) in self.ucb_scores().into_iter().enumerate() {
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    fn observe(&mut self, candidate: usize, reward: f64) -> Result<()> {
        if candidate >= self.table.len() {
            return Err(Error::IndexOutOfRange {
                index: candidate,
                len: self.table.len(),
            });
        }
        let k = self.columns.len();
        let phi = &self.projected[candidate * k..(candidate + 1) * k];
        self.state.observe(phi, reward)
    }
}
