//! Runs a configured experiment over its seeds and writes the results.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use libo_core::environment::{Environment, LookupEnvironment, SyntheticEnvironment};
use libo_core::features::FeatureAtlas;
use libo_core::federated::{run_flibo, vote_recovery_trial};
use libo_core::lifelong::{run_baseline, run_libo, BaselineKernel, LifelongRunRecord, RunEvent};
use libo_core::meta_kgl::recovery_trial;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::lookup::read_lookup_table;
use crate::trace::{summarize_traces, RegretTrace, TraceSummary};

/// Recovery outcome of one seed at one task count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRow {
    pub tasks: usize,
    pub recovered: bool,
    pub selected: usize,
    pub vote_recovered: bool,
    pub vote_selected: usize,
}

/// Recovery rates across seeds at one task count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryPoint {
    pub tasks: usize,
    pub rate: f64,
    pub vote_rate: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedTotals {
    pub seed: u64,
    pub final_cumulative: f64,
    pub fallbacks: usize,
    pub unconverged: usize,
    pub failed_updates: usize,
    pub failed_clients: usize,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub traces: Vec<(u64, RegretTrace)>,
    pub summary: Option<TraceSummary>,
    pub recovery: Vec<RecoveryPoint>,
    pub recovery_rows: Vec<(u64, Vec<RecoveryRow>)>,
    pub totals: Vec<SeedTotals>,
    pub failures: Vec<SeedFailure>,
    pub digest: String,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    kind: ExperimentKind,
    digest: &'a str,
    seeds: &'a [u64],
    final_cumulative_mean: Option<f64>,
    final_cumulative_se: Option<f64>,
    totals: &'a [SeedTotals],
    failures: &'a [SeedFailure],
}

enum SeedResult {
    Lifelong(LifelongRunRecord),
    Offline(Vec<RecoveryRow>),
}

fn totals(seed: u64, record: &LifelongRunRecord) -> SeedTotals {
    let count = |f: fn(&RunEvent) -> bool| record.events.iter().filter(|e| f(e)).count();
    SeedTotals {
        seed,
        final_cumulative: record.total_regret(),
        fallbacks: count(|e| matches!(e, RunEvent::Fallback { .. })),
        unconverged: count(|e| matches!(e, RunEvent::NotConverged { .. })),
        failed_updates: count(|e| matches!(e, RunEvent::MetaUpdateFailed { .. })),
        failed_clients: count(|e| matches!(e, RunEvent::ClientFailed { .. })),
    }
}

fn lookup_environment(config: &ExperimentConfig) -> Result<Option<LookupEnvironment>> {
    let Some(path) = &config.environment.table else {
        return Ok(None);
    };
    let table = read_lookup_table(path)?;
    let e = &config.environment;
    let domain = config
        .domain()?
        .unwrap_or_else(|| libo_core::features::FeatureFamily::from(e.family).default_domain());
    let atlas = FeatureAtlas::new(e.family.into(), e.num_groups, domain)?;
    Ok(Some(LookupEnvironment::new(
        table,
        &atlas,
        e.horizon,
        e.noise_std,
    )?))
}

fn run_seed(
    config: &ExperimentConfig,
    lookup: Option<&LookupEnvironment>,
    seed: u64,
) -> Result<SeedResult> {
    let ucb = config.ucb()?;
    let m = config.environment.num_tasks;
    let synthetic: SyntheticEnvironment;
    let env: &dyn Environment = match (config.kind, lookup) {
        (ExperimentKind::OfflineConsistency, _) => return run_offline(config, seed),
        (ExperimentKind::LifelongLookup, None) => {
            return Err(Error::Config(
                "lifelong_lookup needs environment.table".into(),
            ))
        }
        (ExperimentKind::BaselineOracle, _) | (_, None) => {
            synthetic = SyntheticEnvironment::sample(&config.synthetic_spec()?, seed)?;
            &synthetic
        }
        (_, Some(l)) => l,
    };
    let mut record = match config.kind {
        ExperimentKind::LifelongSynthetic | ExperimentKind::LifelongLookup => {
            run_libo(env, &ucb, &config.libo_config()?, seed)?
        }
        ExperimentKind::FederatedLifelong => run_flibo(env, &ucb, &config.flibo_config(), seed)?,
        ExperimentKind::BaselineOracle => run_baseline(env, &ucb, BaselineKernel::Oracle, m, seed)?,
        ExperimentKind::BaselineFull => run_baseline(env, &ucb, BaselineKernel::Full, m, seed)?,
        ExperimentKind::OfflineConsistency => unreachable!("handled above"),
    };
    record.config_digest = Some(config.digest());
    Ok(SeedResult::Lifelong(record))
}

fn run_offline(config: &ExperimentConfig, seed: u64) -> Result<SeedResult> {
    let spec = config.synthetic_spec()?;
    let o = &config.offline;
    let options = config.solver_options();
    let mut rows = Vec::with_capacity(o.task_counts.len());
    for &m in &o.task_counts {
        let trial = recovery_trial(&spec, m, o.samples, o.omega, o.lambda, seed, &options)?;
        let (vote, _, vote_recovered) = vote_recovery_trial(
            &spec,
            m,
            o.samples,
            o.omega,
            o.federated_lambda,
            o.alpha,
            seed,
            &options,
        )?;
        rows.push(RecoveryRow {
            tasks: m,
            recovered: trial.recovered,
            selected: trial.outcome.estimate.len(),
            vote_recovered,
            vote_selected: vote.len(),
        });
    }
    Ok(SeedResult::Offline(rows))
}

fn recovery_curve(rows: &[(u64, Vec<RecoveryRow>)], task_counts: &[usize]) -> Vec<RecoveryPoint> {
    task_counts
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let hits: Vec<f64> = rows
                .iter()
                .map(|(_, r)| f64::from(u8::from(r[i].recovered)))
                .collect();
            let votes: Vec<f64> = rows
                .iter()
                .map(|(_, r)| f64::from(u8::from(r[i].vote_recovered)))
                .collect();
            RecoveryPoint {
                tasks: m,
                rate: hits.iter().sum::<f64>() / hits.len() as f64,
                vote_rate: votes.iter().sum::<f64>() / votes.len() as f64,
                seeds: rows.len(),
            }
        })
        .collect()
}

/// Executes every seed in parallel and collects the results in seed order.
///
/// A seed that fails is recorded and skipped; the run fails only when every
/// seed does.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let lookup = match config.kind {
        ExperimentKind::OfflineConsistency | ExperimentKind::BaselineOracle => None,
        _ => lookup_environment(config)?,
    };
    let results: Vec<(u64, Result<SeedResult>)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            log::info!("seed {seed}: start");
            (seed, run_seed(config, lookup.as_ref(), seed))
        })
        .collect();

    let mut traces = Vec::new();
    let mut recovery_rows = Vec::new();
    let mut totals_out = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(SeedResult::Lifelong(record)) => {
                totals_out.push(totals(seed, &record));
                traces.push((seed, RegretTrace::from_record(&record)));
            }
            Ok(SeedResult::Offline(rows)) => recovery_rows.push((seed, rows)),
            Err(e) => {
                log::warn!("seed {seed}: {e}");
                failures.push(SeedFailure {
                    seed,
                    reason: e.to_string(),
                });
            }
        }
    }
    if traces.is_empty() && recovery_rows.is_empty() {
        let first = failures
            .first()
            .map_or_else(String::new, |f| f.reason.clone());
        return Err(Error::AllSeedsFailed(first));
    }
    let summary = if traces.is_empty() {
        None
    } else {
        let refs: Vec<&RegretTrace> = traces.iter().map(|(_, t)| t).collect();
        Some(summarize_traces(&refs)?)
    };
    let recovery = if recovery_rows.is_empty() {
        Vec::new()
    } else {
        recovery_curve(&recovery_rows, &config.offline.task_counts)
    };
    Ok(ExperimentOutput {
        traces,
        summary,
        recovery,
        recovery_rows,
        totals: totals_out,
        failures,
        digest: config.digest(),
    })
}

pub fn trace_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("trace_seed{seed}.csv"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the resolved config, one trace (or recovery table) per seed, the
/// per-step summary, the recovery curve and a JSON summary into `config.out`.
pub fn write_output(config: &ExperimentConfig, output: &ExperimentOutput) -> Result<()> {
    let out = &config.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join("config.toml"), &config.to_toml_string()?)?;
    for (seed, trace) in &output.traces {
        trace.write(&trace_path(out, *seed))?;
    }
    if let Some(summary) = &output.summary {
        write(&out.join("summary.csv"), &summary.to_csv_string())?;
    }
    for (seed, rows) in &output.recovery_rows {
        write(&out.join(format!("recovery_seed{seed}.csv")), &csv_of(rows))?;
    }
    if !output.recovery.is_empty() {
        write(&out.join("recovery.csv"), &csv_of(&output.recovery))?;
    }
    let file = SummaryFile {
        kind: config.kind,
        digest: &output.digest,
        seeds: &config.seeds,
        final_cumulative_mean: output.summary.as_ref().map(|s| s.cumulative.final_mean()),
        final_cumulative_se: output
            .summary
            .as_ref()
            .map(|s| s.cumulative.final_standard_error()),
        totals: &output.totals,
        failures: &output.failures,
    };
    let json = serde_json::to_string_pretty(&file).expect("summary serializes");
    write(&out.join("summary.json"), &(json + "\n"))
}

fn csv_of<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

/// [`execute`] followed by [`write_output`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let output = execute(config)?;
    write_output(config, &output)?;
    Ok(output)
}
