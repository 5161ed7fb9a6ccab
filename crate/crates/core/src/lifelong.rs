//! The lifelong wrapper: forced exploration, base-solver delegation and the
//! post-task Meta-KGL kernel update.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bandit::{BaseSolver, SolverFactory};
use crate::environment::Environment;
use crate::error::{config_error, Error, Result};
use crate::features::{FeatureTable, KernelEstimate};
use crate::meta_kgl::{self, PooledDesign, SolverOptions};
use crate::rng::{substream, Purpose, SimRng};

/// How the raw exploration rates `n_s` are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleMode {
    /// `n_s = √n / s^{1/4}`.
    DecreasingLibo,
    /// `n_s = √n`.
    ConstantFederated,
    /// Caller-supplied rates, one per task.
    Custom(Vec<f64>),
}

/// Raw rates `(n_1, …, n_m)`.
pub fn schedule_rates(n: usize, m: usize, mode: &ScheduleMode) -> Result<Vec<f64>> {
    if n == 0 || m == 0 {
        return Err(config_error("horizon and task count must be positive"));
    }
    let root = libm::sqrt(n as f64);
    match mode {
        ScheduleMode::DecreasingLibo => Ok((1..=m)
            .map(|s| root / libm::sqrt(libm::sqrt(s as f64)))
            .collect()),
        ScheduleMode::ConstantFederated => Ok(vec![root; m]),
        ScheduleMode::Custom(rates) => {
            if rates.len() < m {
                return Err(config_error(
                    "custom schedule is shorter than the task count",
                ));
            }
            if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(config_error("custom rates must be finite and nonnegative"));
            }
            Ok(rates[..m].to_vec())
        }
    }
}

/// Integer counts whose running sums track the real rates to within one.
///
/// The fractional parts accumulate in a residue `r ∈ [0, 1)`; whenever it
/// reaches one, the current task takes one extra step.
pub fn integerize(rates: &[f64]) -> Vec<usize> {
    let mut residue = 0.0;
    rates
        .iter()
        .map(|&rate| {
            let whole = libm::floor(rate);
            residue += rate - whole;
            let carry = libm::floor(residue);
            residue -= carry;
            (whole + carry) as usize
        })
        .collect()
}

/// Exploration rates and their integer counts for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSchedule {
    pub mode: ScheduleMode,
    pub rates: Vec<f64>,
    /// Counts clamped to the horizon.
    pub counts: Vec<usize>,
}

impl ExplorationSchedule {
    pub fn new(n: usize, m: usize, mode: ScheduleMode) -> Result<Self> {
        let rates = schedule_rates(n, m, &mode)?;
        let counts = integerize(&rates).into_iter().map(|c| c.min(n)).collect();
        Ok(ExplorationSchedule {
            mode,
            rates,
            counts,
        })
    }

    /// Final residue `Σ n_s − Σ ñ_s`.
    pub fn residual(&self) -> f64 {
        self.rates.iter().sum::<f64>() - self.counts.iter().sum::<usize>() as f64
    }
}

/// Which observations feed the meta-update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetaDataPolicy {
    /// Only the forced-exploration prefixes.
    #[default]
    ExplorationOnly,
    /// Every observation of every finished task.
    AllData,
}

/// Group-lasso regularization for the meta-update after task `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaPolicy {
    Constant(f64),
    /// `λ₀ / √s`.
    SqrtDecay(f64),
    /// `ω̄ c_κ² / (8√s)` with `ω̄ = min(ω, c₁ − ω)`.
    Theoretical {
        beta_min: f64,
        c_kappa: f64,
    },
}

impl LambdaPolicy {
    pub fn lambda(&self, omega: f64, tasks: usize) -> f64 {
        match *self {
            LambdaPolicy::Constant(l) => l,
            LambdaPolicy::SqrtDecay(l) => l / libm::sqrt(tasks as f64),
            LambdaPolicy::Theoretical { beta_min, c_kappa } => {
                meta_kgl::theoretical_lambda(omega, beta_min, c_kappa, tasks)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiboConfig {
    pub num_tasks: usize,
    pub omega: f64,
    pub lambda: LambdaPolicy,
    pub schedule: ScheduleMode,
    pub meta_data: MetaDataPolicy,
    pub solver: SolverOptions,
}

impl Default for LiboConfig {
    fn default() -> Self {
        LiboConfig {
            num_tasks: 20,
            omega: 0.25,
            lambda: LambdaPolicy::Constant(0.5),
            schedule: ScheduleMode::DecreasingLibo,
            meta_data: MetaDataPolicy::ExplorationOnly,
            solver: SolverOptions::default(),
        }
    }
}

impl LiboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 {
            return Err(config_error("task count must be positive"));
        }
        if self.omega.is_nan() || self.omega < 0.0 {
            return Err(config_error("omega must be nonnegative"));
        }
        let l = self.lambda.lambda(self.omega, 1);
        if !(l.is_finite() && l > 0.0) {
            return Err(config_error("lambda must be finite and positive"));
        }
        Ok(())
    }
}

/// One step of a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub candidate: usize,
    pub reward: f64,
    pub regret: f64,
    pub explored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub task: usize,
    /// Kernel handed to the base solver.
    pub kernel: KernelEstimate,
    pub exploration_count: usize,
    pub steps: Vec<StepRecord>,
    /// Whether `kernel` equals the true support, when it is known.
    pub recovered: Option<bool>,
}

impl TaskRecord {
    pub fn regret(&self) -> f64 {
        self.steps.iter().map(|s| s.regret).sum()
    }
}

/// Something that did not stop the run but changed its course.
#[derive(Debug, Clone, PartialEq)]
pub enum RunEvent {
    /// The threshold selected nothing and `k_full` was used.
    Fallback { task: usize },
    /// The group-lasso solver hit its iteration cap; the previous kernel stays.
    NotConverged { task: usize, iterations: usize },
    /// The meta-update failed; the previous kernel stays.
    MetaUpdateFailed { task: usize, error: Error },
    /// A federated client fit failed and voted for nothing.
    ClientFailed { task: usize },
    /// The environment held fewer tasks than requested.
    Exhausted { requested: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifelongRunRecord {
    pub seed: u64,
    pub config_digest: Option<String>,
    pub tasks: Vec<TaskRecord>,
    pub events: Vec<RunEvent>,
}

impl LifelongRunRecord {
    pub fn new(seed: u64) -> Self {
        LifelongRunRecord {
            seed,
            config_digest: None,
            tasks: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Instantaneous regret of every step, task after task.
    pub fn instantaneous(&self) -> Vec<f64> {
        self.tasks
            .iter()
            .flat_map(|t| t.steps.iter().map(|s| s.regret))
            .collect()
    }

    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.instantaneous()
            .into_iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect()
    }

    pub fn total_regret(&self) -> f64 {
        self.cumulative().last().copied().unwrap_or(0.0)
    }

    pub fn task_regrets(&self) -> Vec<f64> {
        self.tasks.iter().map(TaskRecord::regret).collect()
    }
}

/// Per-task randomness: exploration actions and observation noise.
pub(crate) struct TaskStreams {
    exploration: SimRng,
    noise: SimRng,
}

impl TaskStreams {
    pub(crate) fn new(seed: u64, task: usize) -> Self {
        TaskStreams {
            exploration: substream(seed, task as u64, Purpose::Exploration),
            noise: substream(seed, task as u64, Purpose::Noise),
        }
    }
}

pub(crate) fn explore<E: Environment + ?Sized>(
    env: &E,
    task: usize,
    count: usize,
    streams: &mut TaskStreams,
) -> Vec<StepRecord> {
    let len = env.candidates().len();
    (0..count)
        .map(|_| {
            let candidate = streams.exploration.random_range(0..len);
            StepRecord {
                candidate,
                reward: env.sample_reward(task, candidate, &mut streams.noise),
                regret: env.regret(task, candidate),
                explored: true,
            }
        })
        .collect()
}

/// Feeds the prefix to a fresh solver and lets it act for the rest of the horizon.
pub(crate) fn exploit<E, F>(
    env: &E,
    factory: &F,
    kernel: &KernelEstimate,
    task: usize,
    mut steps: Vec<StepRecord>,
    streams: &mut TaskStreams,
) -> Result<Vec<StepRecord>>
where
    E: Environment + ?Sized,
    F: SolverFactory,
{
    let mut solver = factory.build(env.candidates(), kernel)?;
    for step in &steps {
        solver.observe(step.candidate, step.reward)?;
    }
    for _ in steps.len()..env.horizon() {
        let candidate = solver.select();
        let reward = env.sample_reward(task, candidate, &mut streams.noise);
        solver.observe(candidate, reward)?;
        steps.push(StepRecord {
            candidate,
            reward,
            regret: env.regret(task, candidate),
            explored: false,
        });
    }
    Ok(steps)
}

pub(crate) fn recovered<E: Environment + ?Sized>(env: &E, kernel: &KernelEstimate) -> Option<bool> {
    env.true_support().map(|s| s == kernel.selected())
}

pub(crate) fn available_tasks<E: Environment + ?Sized>(
    env: &E,
    requested: usize,
    record: &mut LifelongRunRecord,
) -> usize {
    let available = env.num_tasks();
    if available < requested {
        record.events.push(RunEvent::Exhausted {
            requested,
            available,
        });
    }
    requested.min(available)
}

/// Appends the rows of `steps` (all or only the explored ones) as one task.
pub(crate) fn push_meta_task(
    design: &mut PooledDesign,
    table: &FeatureTable,
    steps: &[StepRecord],
    policy: MetaDataPolicy,
) -> Result<()> {
    let rows: Vec<&StepRecord> = steps
        .iter()
        .filter(|s| policy == MetaDataPolicy::AllData || s.explored)
        .collect();
    if rows.is_empty() {
        return Ok(());
    }
    let mut features = Vec::with_capacity(rows.len() * table.dim());
    for s in &rows {
        features.extend_from_slice(table.row(s.candidate));
    }
    design.push_task(features, rows.iter().map(|s| s.reward).collect())
}

/// Runs the lifelong loop over the first `config.num_tasks` tasks of `env`.
///
/// Task `s` uses the estimate produced after task `s − 1` (`k_full` for the
/// first task). Exploration actions are uniform over the candidate grid and are
/// also observed by the base solver. Tasks that contributed no rows to the
/// meta-dataset are left out of the pooled fit.
pub fn run_libo<E, F>(
    env: &E,
    factory: &F,
    config: &LiboConfig,
    seed: u64,
) -> Result<LifelongRunRecord>
where
    E: Environment + ?Sized,
    F: SolverFactory,
{
    config.validate()?;
    let mut record = LifelongRunRecord::new(seed);
    let m = available_tasks(env, config.num_tasks, &mut record);
    let table = env.candidates();
    let p = table.num_groups();
    let schedule = ExplorationSchedule::new(env.horizon(), m, config.schedule.clone())?;
    let mut design = PooledDesign::new(&group_dims(table));
    let mut kernel = KernelEstimate::full(p);
    for task in 0..m {
        let mut streams = TaskStreams::new(seed, task);
        let count = schedule.counts[task];
        let prefix = explore(env, task, count, &mut streams);
        let steps = exploit(env, factory, &kernel, task, prefix, &mut streams)?;
        push_meta_task(&mut design, table, &steps, config.meta_data)?;
        record.tasks.push(TaskRecord {
            task,
            recovered: recovered(env, &kernel),
            kernel: kernel.clone(),
            exploration_count: count,
            steps,
        });
        if design.num_tasks() == 0 {
            continue;
        }
        let lambda = config.lambda.lambda(config.omega, design.num_tasks());
        match meta_kgl::run_meta_kgl(&design, config.omega, lambda, &config.solver) {
            Ok(outcome) if !outcome.report.converged => {
                record.events.push(RunEvent::NotConverged {
                    task,
                    iterations: outcome.report.iterations,
                })
            }
            Ok(outcome) => {
                if outcome.fallback {
                    record.events.push(RunEvent::Fallback { task });
                }
                kernel = outcome.estimate;
            }
            Err(error) => record
                .events
                .push(RunEvent::MetaUpdateFailed { task, error }),
        }
    }
    Ok(record)
}

/// Fixed kernel for the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKernel {
    /// The environment's true support.
    Oracle,
    /// The uniform average of all base kernels.
    Full,
}

/// The base solver on every task with a fixed kernel, no forced exploration
/// and no meta-updates.
pub fn run_baseline<E, F>(
    env: &E,
    factory: &F,
    kernel: BaselineKernel,
    num_tasks: usize,
    seed: u64,
) -> Result<LifelongRunRecord>
where
    E: Environment + ?Sized,
    F: SolverFactory,
{
    if num_tasks == 0 {
        return Err(config_error("task count must be positive"));
    }
    let p = env.candidates().num_groups();
    let estimate = match kernel {
        BaselineKernel::Full => KernelEstimate::full(p),
        BaselineKernel::Oracle => {
            let support = env
                .true_support()
                .ok_or_else(|| config_error("the oracle baseline needs a known true support"))?;
            KernelEstimate::new(support.iter().copied(), p)?
        }
    };
    let mut record = LifelongRunRecord::new(seed);
    let m = available_tasks(env, num_tasks, &mut record);
    for task in 0..m {
        let mut streams = TaskStreams::new(seed, task);
        let steps = exploit(env, factory, &estimate, task, Vec::new(), &mut streams)?;
        record.tasks.push(TaskRecord {
            task,
            recovered: recovered(env, &estimate),
            kernel: estimate.clone(),
            exploration_count: 0,
            steps,
        });
    }
    Ok(record)
}

pub(crate) fn group_dims(table: &FeatureTable) -> Vec<usize> {
    table.offsets().windows(2).map(|w| w[1] - w[0]).collect()
}
