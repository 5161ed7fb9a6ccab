//! Meta-KGL: the pooled group-lasso fit, block-norm thresholding and kernel
//! construction, plus compatibility diagnostics for scalar groups.
//!
//! The meta-loss over `m` tasks is
//!
//! ```text
//! L(β) = (1/N) Σ_s ||y_s − Φ_s β_s||² + λ Σ_j sqrt(Σ_s ||β_s^(j)||²)
//! ```
//!
//! with `N = Σ_s n_s`. The block-diagonal design `diag(Φ_1, …, Φ_m)` is never
//! materialized; the smooth gradient is assembled task by task.

use alloc::vec;
use alloc::vec::Vec;

use crate::environment::{self, SyntheticSpec};
use crate::error::{Error, Result};
use crate::features::{FeatureAtlas, KernelEstimate};
use crate::linalg;
use crate::rng::{substream, Purpose};

/// One task's design matrix (row-major `rows × d`) and rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDesign {
    rows: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl TaskDesign {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn row(&self, i: usize, dim: usize) -> &[f64] {
        &self.features[i * dim..(i + 1) * dim]
    }
}

/// Pooled per-task data `D_{1:m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDesign {
    offsets: Vec<usize>,
    tasks: Vec<TaskDesign>,
}

impl PooledDesign {
    /// Empty design for groups with the given dimensions.
    pub fn new(group_dims: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(group_dims.len() + 1);
        offsets.push(0);
        for d in group_dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        PooledDesign {
            offsets,
            tasks: Vec::new(),
        }
    }

    pub fn for_atlas(atlas: &FeatureAtlas) -> Self {
        Self::new(atlas.group_dims())
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[TaskDesign] {
        &self.tasks
    }

    /// `N = Σ_s n_s`.
    pub fn total_rows(&self) -> usize {
        self.tasks.iter().map(|t| t.rows).sum()
    }

    /// Appends a task; `features` is row-major with `targets.len()` rows.
    pub fn push_task(&mut self, features: Vec<f64>, targets: Vec<f64>) -> Result<()> {
        let d = self.dim();
        if features.len() != targets.len() * d {
            return Err(Error::Shape {
                expected: targets.len() * d,
                found: features.len(),
            });
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design data"));
        }
        self.tasks.push(TaskDesign {
            rows: targets.len(),
            features,
            targets,
        });
        Ok(())
    }

    /// Appends a task from points evaluated through `atlas`.
    pub fn push_points<'a>(
        &mut self,
        atlas: &FeatureAtlas,
        points: impl IntoIterator<Item = &'a [f64]>,
        targets: Vec<f64>,
    ) -> Result<()> {
        let d = self.dim();
        let mut features = Vec::with_capacity(targets.len() * d);
        let mut row = vec![0.0; d];
        for x in points {
            atlas.eval_concat_into(x, &mut row)?;
            features.extend_from_slice(&row);
        }
        self.push_task(features, targets)
    }
}

/// Block-structured coefficients `β ∈ R^{md}`, task-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCoefficients {
    values: Vec<f64>,
    tasks: usize,
    offsets: Vec<usize>,
}

impl GroupCoefficients {
    pub fn zeros(tasks: usize, offsets: &[usize]) -> Self {
        let d = *offsets.last().unwrap();
        GroupCoefficients {
            values: vec![0.0; tasks * d],
            tasks,
            offsets: offsets.to_vec(),
        }
    }

    pub fn from_values(values: Vec<f64>, tasks: usize, offsets: &[usize]) -> Result<Self> {
        let d = *offsets.last().unwrap();
        if values.len() != tasks * d {
            return Err(Error::Shape {
                expected: tasks * d,
                found: values.len(),
            });
        }
        Ok(GroupCoefficients {
            values,
            tasks,
            offsets: offsets.to_vec(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn task(&self, s: usize) -> &[f64] {
        let d = self.dim();
        &self.values[s * d..(s + 1) * d]
    }

    pub fn block(&self, s: usize, j: usize) -> &[f64] {
        let base = s * self.dim();
        &self.values[base + self.offsets[j]..base + self.offsets[j + 1]]
    }

    pub fn block_mut(&mut self, s: usize, j: usize) -> &mut [f64] {
        let base = s * self.dim();
        &mut self.values[base + self.offsets[j]..base + self.offsets[j + 1]]
    }

    /// `||β^(j)||₂` across all tasks.
    pub fn group_norm(&self, j: usize) -> f64 {
        libm::sqrt(
            (0..self.tasks)
                .map(|s| self.block(s, j).iter().map(|v| v * v).sum::<f64>())
                .sum(),
        )
    }

    pub fn group_norms(&self) -> Vec<f64> {
        (0..self.num_groups()).map(|j| self.group_norm(j)).collect()
    }

    /// `Σ_j ||β^(j)||₂`.
    pub fn penalty(&self) -> f64 {
        self.group_norms().iter().sum()
    }
}

/// Outcome of a group-lasso solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub objective: f64,
    /// Norm of the last proximal-gradient mapping `(y − prox(y − t∇f(y)))/t`.
    pub step_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

fn check_coefficients(design: &PooledDesign, beta: &GroupCoefficients) -> Result<()> {
    if beta.offsets != design.offsets {
        return Err(Error::Shape {
            expected: design.dim(),
            found: beta.dim(),
        });
    }
    if beta.tasks != design.num_tasks() {
        return Err(Error::Shape {
            expected: design.num_tasks(),
            found: beta.tasks,
        });
    }
    Ok(())
}

/// `Σ_s ||y_s − Φ_s β_s||²`.
fn residual_sum_of_squares(design: &PooledDesign, beta: &[f64]) -> f64 {
    let d = design.dim();
    let mut total = 0.0;
    for (s, task) in design.tasks.iter().enumerate() {
        let b = &beta[s * d..(s + 1) * d];
        for i in 0..task.rows {
            let r = task.targets[i] - linalg::dot(task.row(i, d), b);
            total += r * r;
        }
    }
    total
}

/// Writes the smooth-part gradient `(2/N) Φ_sᵀ(Φ_s β_s − y_s)` for every task.
fn smooth_gradient(design: &PooledDesign, beta: &[f64], scale: f64, grad: &mut [f64]) {
    let d = design.dim();
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (s, task) in design.tasks.iter().enumerate() {
        let b = &beta[s * d..(s + 1) * d];
        let g = &mut grad[s * d..(s + 1) * d];
        for i in 0..task.rows {
            let row = task.row(i, d);
            let r = scale * (linalg::dot(row, b) - task.targets[i]);
            if r != 0.0 {
                g.iter_mut().zip(row).for_each(|(gk, xk)| *gk += r * xk);
            }
        }
    }
}

fn group_penalty(offsets: &[usize], tasks: usize, beta: &[f64]) -> f64 {
    let d = *offsets.last().unwrap();
    (0..offsets.len() - 1)
        .map(|j| {
            let sq: f64 = (0..tasks)
                .map(|s| {
                    beta[s * d + offsets[j]..s * d + offsets[j + 1]]
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                })
                .sum();
            libm::sqrt(sq)
        })
        .sum()
}

/// The meta-loss `(1/N)||y − Φβ||² + λ Σ_j ||β^(j)||₂`.
pub fn meta_loss(design: &PooledDesign, beta: &GroupCoefficients, lambda: f64) -> Result<f64> {
    check_coefficients(design, beta)?;
    let n = design.total_rows();
    if n == 0 {
        return Err(Error::EmptyDesign);
    }
    Ok(residual_sum_of_squares(design, &beta.values) / n as f64 + lambda * beta.penalty())
}

/// Group soft-thresholding: each cross-task block is scaled by
/// `max(0, 1 − threshold/||block||)`.
fn group_soft_threshold(offsets: &[usize], tasks: usize, values: &mut [f64], threshold: f64) {
    let d = *offsets.last().unwrap();
    for j in 0..offsets.len() - 1 {
        let (lo, hi) = (offsets[j], offsets[j + 1]);
        let sq: f64 = (0..tasks)
            .map(|s| {
                values[s * d + lo..s * d + hi]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum();
        let norm = libm::sqrt(sq);
        let factor = if norm > threshold {
            1.0 - threshold / norm
        } else {
            0.0
        };
        for s in 0..tasks {
            values[s * d + lo..s * d + hi]
                .iter_mut()
                .for_each(|v| *v *= factor);
        }
    }
}

/// Lipschitz constant of the smooth gradient: `(2/N) max_s λ_max(Φ_sᵀΦ_s)`.
///
/// The Hessian is block diagonal across tasks, so the maximum over tasks is
/// exact; power iteration only gives a lower estimate, hence the inflation.
fn lipschitz_estimate(design: &PooledDesign) -> f64 {
    let d = design.dim();
    let n = design.total_rows() as f64;
    let max_eig = design
        .tasks
        .iter()
        .filter(|t| t.rows > 0)
        .map(|t| {
            let g = linalg::gram(&t.features, t.rows, d);
            linalg::max_eigenvalue(&g, d, 500)
        })
        .fold(0.0, f64::max);
    (2.0 / n) * max_eig * 1.01
}

/// Minimizes the meta-loss by accelerated proximal gradient.
///
/// Momentum is FISTA's; an iterate that would increase the objective beyond
/// rounding is rejected and the momentum restarted.
/// If a plain proximal step from the current iterate still fails to decrease
/// the objective the step size is halved. Stops when the proximal-gradient
/// mapping norm drops to `tol`; hitting `max_iter` is reported, not raised.
pub fn group_lasso_fit(
    design: &PooledDesign,
    lambda: f64,
    options: &SolverOptions,
) -> Result<(GroupCoefficients, SolverReport)> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::NonFinite("regularization"));
    }
    let n_total = design.total_rows();
    if n_total == 0 {
        return Err(Error::EmptyDesign);
    }
    let tasks = design.num_tasks();
    let offsets = design.offsets.clone();
    let dim = tasks * design.dim();
    let scale = 2.0 / n_total as f64;
    let objective = |beta: &[f64]| {
        residual_sum_of_squares(design, beta) / n_total as f64
            + lambda * group_penalty(&offsets, tasks, beta)
    };

    let mut lipschitz = lipschitz_estimate(design);
    if lipschitz <= 0.0 {
        // All-zero design: β = 0 is optimal.
        let beta = GroupCoefficients::zeros(tasks, &offsets);
        let obj = objective(&beta.values);
        return Ok((
            beta,
            SolverReport {
                iterations: 0,
                objective: obj,
                step_norm: 0.0,
                converged: true,
            },
        ));
    }

    let mut x = vec![0.0; dim];
    let mut y = x.clone();
    let mut z = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut fx = objective(&x);
    let mut theta = 1.0_f64;
    let mut step_norm = f64::INFINITY;
    let mut restarted = true;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        let step = 1.0 / lipschitz;
        smooth_gradient(design, &y, scale, &mut grad);
        z.iter_mut()
            .zip(&y)
            .zip(&grad)
            .for_each(|((zk, yk), gk)| *zk = yk - step * gk);
        group_soft_threshold(&offsets, tasks, &mut z, lambda * step);
        step_norm = libm::sqrt(
            z.iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        ) / step;
        let fz = objective(&z);
        // Increases at rounding level are not evidence of a too-long step.
        let slack = 64.0 * f64::EPSILON * (1.0 + fx.abs());

        if fz <= fx + slack {
            let theta_next = (1.0 + libm::sqrt(1.0 + 4.0 * theta * theta)) / 2.0;
            let momentum = (theta - 1.0) / theta_next;
            for k in 0..dim {
                let delta = z[k] - x[k];
                y[k] = z[k] + momentum * delta;
            }
            core::mem::swap(&mut x, &mut z);
            fx = fz;
            theta = theta_next;
            restarted = false;
            if step_norm <= options.tol {
                break;
            }
        } else if restarted {
            if step_norm <= options.tol {
                break;
            }
            // y == x and the prox step still went uphill: the step is too long.
            lipschitz *= 2.0;
        } else {
            y.copy_from_slice(&x);
            theta = 1.0;
            restarted = true;
        }
    }

    let converged = step_norm <= options.tol;
    let beta = GroupCoefficients {
        values: x,
        tasks,
        offsets: offsets.clone(),
    };
    Ok((
        beta,
        SolverReport {
            iterations,
            objective: fx,
            step_norm,
            converged,
        },
    ))
}

/// Largest block-wise violation of the group-lasso optimality conditions.
///
/// For a group with `||β^(j)|| > 0` this is `||g_j + λ β^(j)/||β^(j)|| ||`,
/// otherwise `max(0, ||g_j|| − λ)`, where `g_j` is the smooth gradient
/// restricted to group `j` across all tasks.
pub fn kkt_residual(design: &PooledDesign, beta: &GroupCoefficients, lambda: f64) -> Result<f64> {
    check_coefficients(design, beta)?;
    let n = design.total_rows();
    if n == 0 {
        return Err(Error::EmptyDesign);
    }
    let mut grad = vec![0.0; beta.values.len()];
    smooth_gradient(design, &beta.values, 2.0 / n as f64, &mut grad);
    let g = GroupCoefficients {
        values: grad,
        tasks: beta.tasks,
        offsets: beta.offsets.clone(),
    };
    let mut worst = 0.0_f64;
    for j in 0..beta.num_groups() {
        let norm = beta.group_norm(j);
        let violation = if norm > 0.0 {
            let sq: f64 = (0..beta.tasks)
                .map(|s| {
                    g.block(s, j)
                        .iter()
                        .zip(beta.block(s, j))
                        .map(|(gk, bk)| {
                            let v = gk + lambda * bk / norm;
                            v * v
                        })
                        .sum::<f64>()
                })
                .sum();
            libm::sqrt(sq)
        } else {
            (g.group_norm(j) - lambda).max(0.0)
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

/// `λ_max`: the smallest regularization at which `β = 0` is optimal,
/// `max_j ||g_j(0)||`.
pub fn critical_lambda(design: &PooledDesign) -> Result<f64> {
    let zero = GroupCoefficients::zeros(design.num_tasks(), &design.offsets);
    let n = design.total_rows();
    if n == 0 {
        return Err(Error::EmptyDesign);
    }
    let mut grad = vec![0.0; zero.values.len()];
    smooth_gradient(design, &zero.values, 2.0 / n as f64, &mut grad);
    let g = GroupCoefficients::from_values(grad, zero.tasks, &zero.offsets)?;
    Ok(g.group_norms().into_iter().fold(0.0, f64::max))
}

/// `{ j : ||β^(j)|| > ω √m }`.
pub fn threshold_select(beta: &GroupCoefficients, omega: f64, m: usize) -> Vec<usize> {
    let cut = omega * libm::sqrt(m as f64);
    beta.group_norms()
        .into_iter()
        .enumerate()
        .filter(|&(_, norm)| norm > cut)
        .map(|(j, _)| j)
        .collect()
}

/// Result of one Meta-KGL pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaKglOutcome {
    pub estimate: KernelEstimate,
    /// The threshold selected nothing and `k_full` was substituted.
    pub fallback: bool,
    pub group_norms: Vec<f64>,
    pub report: SolverReport,
}

/// Fit, threshold at `ω√m`, and build the kernel estimate.
pub fn run_meta_kgl(
    design: &PooledDesign,
    omega: f64,
    lambda: f64,
    options: &SolverOptions,
) -> Result<MetaKglOutcome> {
    let (beta, report) = group_lasso_fit(design, lambda, options)?;
    let selected = threshold_select(&beta, omega, design.num_tasks());
    let p = design.num_groups();
    let fallback = selected.is_empty();
    let estimate = if fallback {
        KernelEstimate::full(p)
    } else {
        KernelEstimate::new(selected, p)?
    };
    Ok(MetaKglOutcome {
        estimate,
        fallback,
        group_norms: beta.group_norms(),
        report,
    })
}

/// One offline consistency trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTrial {
    pub true_support: Vec<usize>,
    pub outcome: MetaKglOutcome,
    /// `Ĵ = J*` exactly (a fallback never counts).
    pub recovered: bool,
}

/// Samples `J*` and `m` reward functions and observes each at `n` uniform
/// points of the domain.
pub fn offline_dataset(
    spec: &SyntheticSpec,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<(Vec<usize>, PooledDesign)> {
    spec.validate()?;
    if m == 0 || n == 0 {
        return Err(crate::error::config_error(
            "task count and sample size must be positive",
        ));
    }
    let atlas = spec.atlas()?;
    let true_support = environment::sample_true_support(
        spec.num_groups,
        spec.support_size,
        &mut substream(seed, 0, Purpose::Support),
    );
    let mut design = PooledDesign::for_atlas(&atlas);
    for s in 0..m as u64 {
        let beta = environment::sample_reward_function(
            spec,
            atlas.offsets(),
            &true_support,
            &mut substream(seed, s, Purpose::Coefficients),
        )?;
        let mut design_rng = substream(seed, s, Purpose::Design);
        let mut noise_rng = substream(seed, s, Purpose::Noise);
        let mut features = Vec::with_capacity(n * atlas.total_dim());
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let x = environment::sample_uniform_point(atlas.domain(), &mut design_rng);
            targets.push(environment::reward(
                &beta,
                &atlas,
                &x,
                &mut noise_rng,
                spec.noise_std,
            )?);
            features.extend(atlas.eval_concat(&x)?);
        }
        design.push_task(features, targets)?;
    }
    Ok((true_support, design))
}

/// Runs Meta-KGL on an [`offline_dataset`] and checks the selection against `J*`.
pub fn recovery_trial(
    spec: &SyntheticSpec,
    m: usize,
    n: usize,
    omega: f64,
    lambda: f64,
    seed: u64,
    options: &SolverOptions,
) -> Result<RecoveryTrial> {
    let (true_support, design) = offline_dataset(spec, m, n, seed)?;
    let outcome = run_meta_kgl(&design, omega, lambda, options)?;
    let recovered = !outcome.fallback && outcome.estimate.selected() == true_support.as_slice();
    Ok(RecoveryTrial {
        true_support,
        outcome,
        recovered,
    })
}

/// Design-quality constants for scalar groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityDiagnostics {
    /// `min_i (m/N)(ΦᵀΦ)_{ii}`.
    pub c_d: f64,
    /// `max_{i≠j} |(m/N)(ΦᵀΦ)_{ij}|`.
    pub c_od: f64,
    /// `sqrt(c_d/s* − 5 c_od)` when the radicand is positive.
    pub kappa_lower: Option<f64>,
}

/// Lower bound on the compatibility constant from the normalized Gram matrix.
pub fn compatibility_diagnostics(
    design: &PooledDesign,
    s_star: usize,
) -> Result<CompatibilityDiagnostics> {
    for j in 0..design.num_groups() {
        let dim = design.offsets[j + 1] - design.offsets[j];
        if dim != 1 {
            return Err(Error::UnsupportedDiagnostic { group: j, dim });
        }
    }
    if s_star == 0 {
        return Err(crate::error::config_error("s* must be at least 1"));
    }
    let n = design.total_rows();
    if n == 0 {
        return Err(Error::EmptyDesign);
    }
    let d = design.dim();
    let m = design.num_tasks() as f64;
    let scale = m / n as f64;
    let mut c_d = f64::INFINITY;
    let mut c_od = 0.0_f64;
    for task in &design.tasks {
        let g = linalg::gram(&task.features, task.rows, d);
        for i in 0..d {
            c_d = c_d.min(scale * g[i * d + i]);
            for j in 0..d {
                if i != j {
                    c_od = c_od.max((scale * g[i * d + j]).abs());
                }
            }
        }
    }
    let radicand = c_d / s_star as f64 - 5.0 * c_od;
    Ok(CompatibilityDiagnostics {
        c_d,
        c_od,
        kappa_lower: (radicand > 0.0).then(|| libm::sqrt(radicand)),
    })
}

/// Regularization from the consistency analysis: `ω̄ c_κ² / (8√m)` with
/// `ω̄ = min(ω, c₁ − ω)`.
pub fn theoretical_lambda(omega: f64, beta_min: f64, c_kappa: f64, m: usize) -> f64 {
    let omega_bar = omega.min(beta_min - omega);
    omega_bar * c_kappa * c_kappa / (8.0 * libm::sqrt(m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_design(tasks: &[(&[f64], &[f64])], d: usize) -> PooledDesign {
        let mut design = PooledDesign::new(&vec![1; d]);
        for (x, y) in tasks {
            design.push_task(x.to_vec(), y.to_vec()).unwrap();
        }
        design
    }

    #[test]
    fn meta_loss_examples() {
        let design = scalar_design(&[(&[1.0], &[2.0])], 1);
        let beta = GroupCoefficients::from_values(vec![1.0], 1, design.offsets()).unwrap();
        assert!((meta_loss(&design, &beta, 0.5).unwrap() - 1.5).abs() < 1e-15);
        let zero = GroupCoefficients::zeros(1, design.offsets());
        assert!((meta_loss(&design, &zero, 0.5).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn meta_loss_shape_error() {
        let design = scalar_design(&[(&[1.0], &[2.0])], 1);
        let beta = GroupCoefficients::zeros(2, design.offsets());
        assert!(matches!(
            meta_loss(&design, &beta, 0.1),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn identity_design_unregularized() {
        let design = scalar_design(&[(&[1.0, 0.0, 0.0, 1.0], &[1.0, 2.0])], 2);
        let (beta, report) = group_lasso_fit(&design, 0.0, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        assert!((beta.values()[0] - 1.0).abs() < 1e-8);
        assert!((beta.values()[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn large_lambda_gives_exact_zero() {
        let design = scalar_design(&[(&[1.0, 0.5, 0.2, -1.0, 0.3, 0.9], &[1.0, -0.5, 2.0])], 2);
        let crit = critical_lambda(&design).unwrap();
        let (beta, report) =
            group_lasso_fit(&design, crit * 1.5, &SolverOptions::default()).unwrap();
        assert!(report.converged);
        assert!(beta.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_example_matches_grid_oracle() {
        let design = scalar_design(&[(&[1.0; 4], &[1.0; 4])], 1);
        let (beta, _) = group_lasso_fit(&design, 1.0, &SolverOptions::default()).unwrap();
        // Grid oracle: (1/4)Σ(1−b)² + |b| on [−3, 3] at step 1e−6.
        let mut best = (f64::INFINITY, 0.0);
        let steps = 6_000_000;
        for k in 0..=steps {
            let b = -3.0 + 6.0 * k as f64 / steps as f64;
            let f = (1.0 - b) * (1.0 - b) + b.abs();
            if f < best.0 {
                best = (f, b);
            }
        }
        assert!((best.1 - 0.5).abs() < 1e-6);
        assert!((beta.values()[0] - best.1).abs() < 1e-6);
    }

    #[test]
    fn threshold_examples() {
        let offsets = [0, 1, 2, 3];
        let beta = GroupCoefficients::from_values(vec![0.6, 0.4, 0.5], 1, &offsets).unwrap();
        assert_eq!(threshold_select(&beta, 0.5, 1), vec![0]);
        let zero = GroupCoefficients::zeros(1, &offsets);
        assert!(threshold_select(&zero, 0.5, 1).is_empty());
        // m = 4 tasks, cross-task norms (0.6, 0.4): threshold 0.25·√4 = 0.5.
        let values = vec![0.3, 0.2, 0.3, 0.2, 0.3, 0.2, 0.3, 0.2];
        let beta = GroupCoefficients::from_values(values, 4, &[0, 1, 2]).unwrap();
        assert!((beta.group_norm(0) - 0.6).abs() < 1e-15);
        assert_eq!(threshold_select(&beta, 0.25, 4), vec![0]);
    }

    #[test]
    fn zero_rewards_fall_back_to_full() {
        let design = scalar_design(&[(&[1.0, 0.5, 0.2, -1.0], &[0.0, 0.0])], 2);
        let out = run_meta_kgl(&design, 0.1, 0.1, &SolverOptions::default()).unwrap();
        assert!(out.fallback);
        assert!(out.estimate.is_full());
    }

    #[test]
    fn nan_data_rejected() {
        let mut design = PooledDesign::new(&[1]);
        assert_eq!(
            design.push_task(vec![f64::NAN], vec![1.0]),
            Err(Error::NonFinite("design data"))
        );
    }

    #[test]
    fn diagnostics_examples() {
        // One task, N = 2, Φ = I·√2 so that (m/N)ΦᵀΦ = I.
        let r = libm::sqrt(2.0);
        let design = scalar_design(&[(&[r, 0.0, 0.0, r], &[0.0, 0.0])], 2);
        let diag = compatibility_diagnostics(&design, 1).unwrap();
        assert!((diag.c_d - 1.0).abs() < 1e-12);
        assert!(diag.c_od.abs() < 1e-12);
        assert!((diag.kappa_lower.unwrap() - 1.0).abs() < 1e-12);

        // (m/N)ΦᵀΦ = [[1, 0.1], [0.1, 1]] from a Cholesky-style factor.
        let design = gram_design(0.1);
        let diag = compatibility_diagnostics(&design, 1).unwrap();
        assert!((diag.c_od - 0.1).abs() < 1e-12);
        assert!((diag.kappa_lower.unwrap() - libm::sqrt(0.5)).abs() < 1e-12);

        let diag = compatibility_diagnostics(&gram_design(0.3), 1).unwrap();
        assert_eq!(diag.kappa_lower, None);
    }

    /// Two-row single-task design with `(1/2)ΦᵀΦ = [[1, ρ], [ρ, 1]]`.
    fn gram_design(rho: f64) -> PooledDesign {
        let r = libm::sqrt(2.0);
        let rows = [r, r * rho, 0.0, r * libm::sqrt(1.0 - rho * rho)];
        scalar_design(&[(&rows, &[0.0, 0.0])], 2)
    }

    #[test]
    fn diagnostics_reject_vector_groups() {
        let design = PooledDesign::new(&[2, 1]);
        assert!(matches!(
            compatibility_diagnostics(&design, 1),
            Err(Error::UnsupportedDiagnostic { group: 0, dim: 2 })
        ));
    }

    #[test]
    fn blocks_reassemble() {
        let offsets = [0, 2, 3];
        let values: Vec<f64> = (0..6).map(|v| v as f64).collect();
        let beta = GroupCoefficients::from_values(values.clone(), 2, &offsets).unwrap();
        let mut rebuilt = Vec::new();
        for s in 0..2 {
            for j in 0..2 {
                rebuilt.extend_from_slice(beta.block(s, j));
            }
        }
        assert_eq!(rebuilt, values);
        assert_eq!(beta.block(1, 0), &[3.0, 4.0]);
    }

    #[test]
    fn theoretical_lambda_formula() {
        let v = theoretical_lambda(0.25, 0.5, 2.0, 4);
        assert!((v - 0.25 * 4.0 / 16.0).abs() < 1e-15);
    }
}
