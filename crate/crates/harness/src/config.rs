//! Experiment configuration.
//!
//! A config is one TOML file. Every key has a default, so an empty file
//! describes the synthetic lifelong experiment with the published
//! hyperparameters. Keys can be replaced from the command line with dotted
//! paths such as `libo.lambda=0.3`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use libo_core::bandit::{theoretical_lambda_ucb, ExplorationCoefficient, UcbConfig};
use libo_core::environment::SyntheticSpec;
use libo_core::features::{Domain, FeatureFamily};
use libo_core::federated::FliboConfig;
use libo_core::lifelong::{LambdaPolicy, LiboConfig, MetaDataPolicy, ScheduleMode};
use libo_core::meta_kgl::SolverOptions;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OfflineConsistency,
    LifelongSynthetic,
    LifelongLookup,
    FederatedLifelong,
    BaselineOracle,
    BaselineFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Cosine1d,
    Legendre1d,
    CosineTensor2d,
}

impl From<Family> for FeatureFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::Cosine1d => FeatureFamily::Cosine1D,
            Family::Legendre1d => FeatureFamily::Legendre1D,
            Family::CosineTensor2d => FeatureFamily::CosineTensor2D,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub family: Family,
    pub num_groups: usize,
    /// Lower corner of the domain; the family default when absent.
    pub domain_lower: Option<Vec<f64>>,
    pub domain_upper: Option<Vec<f64>>,
    pub support_size: usize,
    pub norm_bound: f64,
    pub beta_min: f64,
    pub noise_std: f64,
    pub horizon: usize,
    pub num_tasks: usize,
    /// Grid points per axis.
    pub grid_resolution: usize,
    /// Lookup-table file for `lifelong_lookup`.
    pub table: Option<PathBuf>,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            family: Family::Cosine1d,
            num_groups: 50,
            domain_lower: None,
            domain_upper: None,
            support_size: 5,
            norm_bound: 10.0,
            beta_min: 0.5,
            noise_std: 0.1,
            horizon: 100,
            num_tasks: 20,
            grid_resolution: 500,
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub nu: f64,
    pub lambda_ucb: f64,
    /// Use `1 + 2/n` instead of `lambda_ucb`.
    pub theoretical_lambda_ucb: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nu: 10.0,
            lambda_ucb: 0.1,
            theoretical_lambda_ucb: false,
            tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    Constant,
    SqrtDecay,
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaData {
    ExplorationOnly,
    AllData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Decreasing,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiboSection {
    pub omega: f64,
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    /// Compatibility constant for the theoretical λ.
    pub c_kappa: f64,
    pub meta_data: MetaData,
    pub schedule: Schedule,
}

impl Default for LiboSection {
    fn default() -> Self {
        LiboSection {
            omega: 0.25,
            lambda: 0.5,
            lambda_mode: LambdaMode::Constant,
            c_kappa: 1.0,
            meta_data: MetaData::ExplorationOnly,
            schedule: Schedule::Decreasing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederatedSection {
    pub omega: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl Default for FederatedSection {
    fn default() -> Self {
        FederatedSection {
            omega: 0.25,
            lambda: 0.2,
            alpha: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfflineSection {
    /// Task counts `m` of the recovery curve.
    pub task_counts: Vec<usize>,
    /// Samples per task.
    pub samples: usize,
    pub omega: f64,
    pub lambda: f64,
    /// λ of the federated (vote-based) selector.
    pub federated_lambda: f64,
    pub alpha: f64,
}

impl Default for OfflineSection {
    fn default() -> Self {
        OfflineSection {
            task_counts: (1..=30).collect(),
            samples: 10,
            omega: 0.25,
            lambda: 0.25,
            federated_lambda: 0.015,
            alpha: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub environment: EnvironmentConfig,
    pub solver: SolverConfig,
    pub libo: LiboSection,
    pub federated: FederatedSection,
    pub offline: OfflineSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::LifelongSynthetic,
            seeds: (0..20).collect(),
            out: PathBuf::from("results"),
            environment: EnvironmentConfig::default(),
            solver: SolverConfig::default(),
            libo: LiboSection::default(),
            federated: FederatedSection::default(),
            offline: OfflineSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Reads `path` (or the defaults), applies `key=value` overrides in order
    /// and validates the result.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_table(&text)?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(one_line(&e.to_string())))
    }

    /// SHA-256 of the canonical JSON form (keys sorted), hex encoded.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("the seed list is empty".into()));
        }
        let env = &self.environment;
        if env.grid_resolution < 2 {
            return Err(Error::Config(
                "environment.grid_resolution must be at least 2".into(),
            ));
        }
        if env.domain_lower.is_some() != env.domain_upper.is_some() {
            return Err(Error::Config(
                "set both environment.domain_lower and domain_upper".into(),
            ));
        }
        self.ucb()?.validate()?;
        match self.kind {
            ExperimentKind::OfflineConsistency => {
                self.synthetic_spec()?.validate()?;
                if self.offline.task_counts.is_empty() || self.offline.task_counts.contains(&0) {
                    return Err(Error::Config("offline.task_counts must be positive".into()));
                }
                if self.offline.samples == 0 {
                    return Err(Error::Config("offline.samples must be positive".into()));
                }
                positive("offline.lambda", self.offline.lambda)?;
                positive("offline.federated_lambda", self.offline.federated_lambda)?;
                unit_interval("offline.alpha", self.offline.alpha)?;
                nonnegative("offline.omega", self.offline.omega)?;
            }
            ExperimentKind::LifelongLookup => {
                if env.table.is_none() {
                    return Err(Error::Config(
                        "lifelong_lookup needs environment.table".into(),
                    ));
                }
                self.libo_config()?.validate()?;
            }
            ExperimentKind::LifelongSynthetic => {
                self.synthetic_spec()?.validate()?;
                self.libo_config()?.validate()?;
            }
            ExperimentKind::FederatedLifelong => {
                if env.table.is_none() {
                    self.synthetic_spec()?.validate()?;
                }
                self.flibo_config().validate()?;
            }
            ExperimentKind::BaselineOracle => self.synthetic_spec()?.validate()?,
            ExperimentKind::BaselineFull => {
                if env.table.is_none() {
                    self.synthetic_spec()?.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<Option<Domain>> {
        match (
            &self.environment.domain_lower,
            &self.environment.domain_upper,
        ) {
            (Some(lo), Some(hi)) => Ok(Some(Domain::new(lo.clone(), hi.clone())?)),
            _ => Ok(None),
        }
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let e = &self.environment;
        Ok(SyntheticSpec {
            family: e.family.into(),
            num_groups: e.num_groups,
            domain: self.domain()?,
            support_size: e.support_size,
            norm_bound: e.norm_bound,
            beta_min: e.beta_min,
            noise_std: e.noise_std,
            horizon: e.horizon,
            num_tasks: e.num_tasks,
            grid_resolution: e.grid_resolution,
        })
    }

    pub fn ucb(&self) -> Result<UcbConfig> {
        let s = &self.solver;
        let lambda_ucb = if s.theoretical_lambda_ucb {
            theoretical_lambda_ucb(self.environment.horizon)
        } else {
            s.lambda_ucb
        };
        Ok(UcbConfig {
            nu: ExplorationCoefficient::Constant(s.nu),
            lambda_ucb,
            grid_resolution: self.environment.grid_resolution,
        })
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
        }
    }

    pub fn libo_config(&self) -> Result<LiboConfig> {
        let l = &self.libo;
        let lambda = match l.lambda_mode {
            LambdaMode::Constant => LambdaPolicy::Constant(l.lambda),
            LambdaMode::SqrtDecay => LambdaPolicy::SqrtDecay(l.lambda),
            LambdaMode::Theoretical => LambdaPolicy::Theoretical {
                beta_min: self.environment.beta_min,
                c_kappa: l.c_kappa,
            },
        };
        Ok(LiboConfig {
            num_tasks: self.environment.num_tasks,
            omega: l.omega,
            lambda,
            schedule: schedule(l.schedule),
            meta_data: match l.meta_data {
                MetaData::ExplorationOnly => MetaDataPolicy::ExplorationOnly,
                MetaData::AllData => MetaDataPolicy::AllData,
            },
            solver: self.solver_options(),
        })
    }

    pub fn flibo_config(&self) -> FliboConfig {
        FliboConfig {
            num_tasks: self.environment.num_tasks,
            omega: self.federated.omega,
            lambda: self.federated.lambda,
            alpha: self.federated.alpha,
            schedule: ScheduleMode::ConstantFederated,
            solver: self.solver_options(),
        }
    }
}

fn schedule(s: Schedule) -> ScheduleMode {
    match s {
        Schedule::Decreasing => ScheduleMode::DecreasingLibo,
        Schedule::Constant => ScheduleMode::ConstantFederated,
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be finite and positive")))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be nonnegative")))
    }
}

fn unit_interval(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must lie in [0, 1]")))
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(one_line(&e.to_string())))
}

/// Sets `a.b.c = value` in `table`. The value is read as TOML and taken as a
/// plain string when it does not parse.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} is malformed")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key {key:?} crosses a non-table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.solver.nu, 10.0);
        assert_eq!(cfg.solver.lambda_ucb, 0.1);
        assert_eq!(cfg.offline.lambda, 0.25);
        assert_eq!(cfg.libo.lambda, 0.5);
        assert_eq!(cfg.federated.lambda, 0.2);
    }

    #[test]
    fn round_trip_keeps_digest() {
        let mut cfg = ExperimentConfig::default();
        cfg.libo.lambda = 0.3;
        cfg.environment.domain_lower = Some(vec![0.0]);
        cfg.environment.domain_upper = Some(vec![1.0]);
        let text = cfg.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn digest_ignores_key_order() {
        let a =
            ExperimentConfig::from_toml_str("seeds = [1, 2]\n[libo]\nomega = 0.3\nlambda = 0.4\n")
                .unwrap();
        let b = ExperimentConfig::from_toml_str(
            "[libo]\nlambda = 0.4\nomega = 0.3\n[solver]\nnu = 10.0\n",
        )
        .unwrap();
        let c = ExperimentConfig::from_toml_str("[libo]\nlambda = 0.4\nomega = 0.3\n").unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(b.digest(), c.digest());
    }

    #[test]
    fn overrides() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "libo.lambda=0.3").unwrap();
        apply_override(&mut t, "kind = offline_consistency").unwrap();
        apply_override(&mut t, "seeds=[4,5]").unwrap();
        let cfg = ExperimentConfig::from_table(t).unwrap();
        assert_eq!(cfg.libo.lambda, 0.3);
        assert_eq!(cfg.kind, ExperimentKind::OfflineConsistency);
        assert_eq!(cfg.seeds, vec![4, 5]);
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
    }

    #[test]
    fn empty_seeds_rejected() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("seeds = []"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("[libo]\nlamda = 0.3").is_err());
    }
}
