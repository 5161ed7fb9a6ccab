//! Federated kernel selection: clients fit a single-task group lasso on their
//! own exploration data and send back only the indices they believe in; the
//! server keeps the indices backed by an `α` share of the clients so far.
//!
//! [`ClientVote`] is the only value that crosses from client to server, and
//! [`VoteLedger`] only ever accepts votes.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bandit::SolverFactory;
use crate::environment::{Environment, SyntheticSpec};
use crate::error::{config_error, Error, Result};
use crate::features::KernelEstimate;
use crate::lifelong::{
    self, ExplorationSchedule, LifelongRunRecord, RunEvent, ScheduleMode, TaskRecord, TaskStreams,
};
use crate::meta_kgl::{self, PooledDesign, SolverOptions, SolverReport};

/// Index vote of one client. Written as `client<TAB>i,j,k` on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClientVote {
    pub client: usize,
    indices: Vec<usize>,
}

impl ClientVote {
    pub fn new(client: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        ClientVote { client, indices }
    }

    /// Sorted, duplicate-free.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl fmt::Display for ClientVote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t", self.client)?;
        for (k, j) in self.indices.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{j}")?;
        }
        Ok(())
    }
}

impl FromStr for ClientVote {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || config_error(alloc::format!("malformed vote record: {s:?}"));
        let (client, list) = s.split_once('\t').ok_or_else(bad)?;
        let client = client.trim().parse().map_err(|_| bad())?;
        let list = list.trim();
        let indices = if list.is_empty() {
            Vec::new()
        } else {
            list.split(',')
                .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(ClientVote::new(client, indices))
    }
}

/// Client-side result: the vote plus what stays on the client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientFit {
    pub vote: ClientVote,
    pub exploration_count: usize,
    /// The local solve failed or did not converge; the vote is empty.
    pub failed: bool,
    pub report: Option<SolverReport>,
}

/// Single-task group lasso on one client's data, thresholded at `ω`.
///
/// `features` is row-major with one row per target.
pub fn client_fit(
    client: usize,
    group_dims: &[usize],
    features: Vec<f64>,
    targets: Vec<f64>,
    lambda: f64,
    omega: f64,
    options: &SolverOptions,
) -> ClientFit {
    let exploration_count = targets.len();
    let failed = |report| ClientFit {
        vote: ClientVote::new(client, []),
        exploration_count,
        failed: true,
        report,
    };
    if exploration_count == 0 {
        return failed(None);
    }
    let mut design = PooledDesign::new(group_dims);
    if design.push_task(features, targets).is_err() {
        return failed(None);
    }
    match meta_kgl::group_lasso_fit(&design, lambda, options) {
        Ok((beta, report)) if report.converged => ClientFit {
            vote: ClientVote::new(client, meta_kgl::threshold_select(&beta, omega, 1)),
            exploration_count,
            failed: false,
            report: Some(report),
        },
        Ok((_, report)) => failed(Some(report)),
        Err(_) => failed(None),
    }
}

/// Running per-index vote counts.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteLedger {
    counts: Vec<usize>,
    clients: usize,
    alpha: f64,
}

impl VoteLedger {
    pub fn new(num_groups: usize, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(config_error("alpha must lie in [0, 1]"));
        }
        Ok(VoteLedger {
            counts: vec![0; num_groups],
            clients: 0,
            alpha,
        })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Counts one client, empty votes included.
    pub fn record(&mut self, vote: &ClientVote) -> Result<()> {
        let p = self.counts.len();
        if let Some(&j) = vote.indices.iter().find(|&&j| j >= p) {
            return Err(Error::IndexOutOfRange { index: j, len: p });
        }
        for &j in &vote.indices {
            self.counts[j] += 1;
        }
        self.clients += 1;
        Ok(())
    }

    /// Adds another ledger's counts; order of merging never matters.
    pub fn merge(&mut self, other: &VoteLedger) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(Error::Shape {
                expected: self.counts.len(),
                found: other.counts.len(),
            });
        }
        if other.alpha != self.alpha {
            return Err(config_error("cannot merge ledgers with different alpha"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.clients += other.clients;
        Ok(())
    }

    /// `{ j : count_j ≥ s·α, count_j ≥ 1 }`.
    pub fn server_vote(&self) -> Vec<usize> {
        let cut = self.clients as f64 * self.alpha;
        self.counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c >= 1 && c as f64 >= cut)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Builds a ledger from a batch of votes and returns the server set.
pub fn aggregate(votes: &[ClientVote], num_groups: usize, alpha: f64) -> Result<Vec<usize>> {
    let mut ledger = VoteLedger::new(num_groups, alpha)?;
    for v in votes {
        ledger.record(v)?;
    }
    Ok(ledger.server_vote())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FliboConfig {
    pub num_tasks: usize,
    pub omega: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub schedule: ScheduleMode,
    pub solver: SolverOptions,
}

impl Default for FliboConfig {
    fn default() -> Self {
        FliboConfig {
            num_tasks: 20,
            omega: 0.25,
            lambda: 0.2,
            alpha: 0.25,
            schedule: ScheduleMode::ConstantFederated,
            solver: SolverOptions::default(),
        }
    }
}

impl FliboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 {
            return Err(config_error("task count must be positive"));
        }
        if self.omega.is_nan() || self.omega < 0.0 {
            return Err(config_error("omega must be nonnegative"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(config_error("lambda must be finite and positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(config_error("alpha must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Federated lifelong run: each task is a client.
///
/// A client explores, fits locally, and sends its vote; the server set after
/// that vote is the kernel for the client's own exploitation phase.
pub fn run_flibo<E, F>(
    env: &E,
    factory: &F,
    config: &FliboConfig,
    seed: u64,
) -> Result<LifelongRunRecord>
where
    E: Environment + ?Sized,
    F: SolverFactory,
{
    config.validate()?;
    let mut record = LifelongRunRecord::new(seed);
    let m = lifelong::available_tasks(env, config.num_tasks, &mut record);
    let table = env.candidates();
    let p = table.num_groups();
    let dims = lifelong::group_dims(table);
    let schedule = ExplorationSchedule::new(env.horizon(), m, config.schedule.clone())?;
    let mut ledger = VoteLedger::new(p, config.alpha)?;
    for task in 0..m {
        let mut streams = TaskStreams::new(seed, task);
        let count = schedule.counts[task];
        let prefix = lifelong::explore(env, task, count, &mut streams);

        let mut features = Vec::with_capacity(prefix.len() * table.dim());
        for s in &prefix {
            features.extend_from_slice(table.row(s.candidate));
        }
        let targets = prefix.iter().map(|s| s.reward).collect();
        let fit = client_fit(
            task,
            &dims,
            features,
            targets,
            config.lambda,
            config.omega,
            &config.solver,
        );
        if fit.failed {
            record.events.push(RunEvent::ClientFailed { task });
        }
        ledger.record(&fit.vote)?;

        let selected = ledger.server_vote();
        let kernel = if selected.is_empty() {
            record.events.push(RunEvent::Fallback { task });
            KernelEstimate::full(p)
        } else {
            KernelEstimate::new(selected, p)?
        };
        let steps = lifelong::exploit(env, factory, &kernel, task, prefix, &mut streams)?;
        record.tasks.push(TaskRecord {
            task,
            recovered: lifelong::recovered(env, &kernel),
            kernel,
            exploration_count: count,
            steps,
        });
    }
    Ok(record)
}

/// Offline federated selection: every task of an offline dataset is a client.
///
/// Returns the server set (empty when nobody passed the vote), the true
/// support, and whether the two agree.
#[allow(clippy::too_many_arguments)]
pub fn vote_recovery_trial(
    spec: &SyntheticSpec,
    m: usize,
    n: usize,
    omega: f64,
    lambda: f64,
    alpha: f64,
    seed: u64,
    options: &SolverOptions,
) -> Result<(Vec<usize>, Vec<usize>, bool)> {
    let (support, design) = meta_kgl::offline_dataset(spec, m, n, seed)?;
    let dims: Vec<usize> = design.offsets().windows(2).map(|w| w[1] - w[0]).collect();
    let mut ledger = VoteLedger::new(design.num_groups(), alpha)?;
    for (client, task) in design.tasks().iter().enumerate() {
        let fit = client_fit(
            client,
            &dims,
            task.features().to_vec(),
            task.targets().to_vec(),
            lambda,
            omega,
            options,
        );
        ledger.record(&fit.vote)?;
    }
    let selected = ledger.server_vote();
    let recovered = selected == support;
    Ok((selected, support, recovered))
}

/// Wire records of a sequence of votes, one per line.
pub fn vote_log(votes: &[ClientVote]) -> String {
    let mut out = String::new();
    for v in votes {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}
