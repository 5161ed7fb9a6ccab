//! Task generators: the synthetic sparse-kernel environment and a lookup-table
//! environment, both evaluated on a finite candidate grid so the regret oracle
//! is exact.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{config_error, Error, Result};
use crate::features::{Domain, FeatureAtlas, FeatureFamily, FeatureTable, PointGrid};
use crate::linalg;
use crate::rng::{substream, Purpose, SimRng};

/// A sequence of bandit tasks over a shared candidate set.
pub trait Environment {
    fn num_tasks(&self) -> usize;

    fn horizon(&self) -> usize;

    /// Candidate points and their concatenated base features.
    fn candidates(&self) -> &FeatureTable;

    /// Noise-free reward `f_s(x)` of a candidate.
    fn mean_reward(&self, task: usize, candidate: usize) -> f64;

    fn noise_std(&self) -> f64;

    /// Grid maximizer of `f_s` and its value.
    fn optimum(&self, task: usize) -> (usize, f64);

    /// The active kernel set, when the environment knows it.
    fn true_support(&self) -> Option<&[usize]>;

    /// `f_s(x) + ε` with `ε ~ N(0, σ²)`.
    fn sample_reward(&self, task: usize, candidate: usize, rng: &mut SimRng) -> f64 {
        let sigma = self.noise_std();
        let mean = self.mean_reward(task, candidate);
        if sigma == 0.0 {
            mean
        } else {
            let eps: f64 = rng.sample(StandardNormal);
            mean + sigma * eps
        }
    }

    /// `f_s(x*) − f_s(x)`.
    fn regret(&self, task: usize, candidate: usize) -> f64 {
        self.optimum(task).1 - self.mean_reward(task, candidate)
    }
}

/// Parameters of the synthetic environment.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub family: FeatureFamily,
    pub num_groups: usize,
    /// `None` uses the family's default domain.
    pub domain: Option<Domain>,
    /// `|J*|`.
    pub support_size: usize,
    /// `B`, the cap on the coefficient norm.
    pub norm_bound: f64,
    /// `c₁`, the per-task minimum block norm.
    pub beta_min: f64,
    pub noise_std: f64,
    pub horizon: usize,
    pub num_tasks: usize,
    pub grid_resolution: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            family: FeatureFamily::Cosine1D,
            num_groups: 50,
            domain: None,
            support_size: 5,
            norm_bound: 10.0,
            beta_min: 0.5,
            noise_std: 0.1,
            horizon: 100,
            num_tasks: 20,
            grid_resolution: 500,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.support_size == 0 || self.support_size > self.num_groups {
            return Err(config_error("support size must lie in 1..=p"));
        }
        if !(self.beta_min >= 0.0 && self.norm_bound.is_finite()) {
            return Err(config_error("beta-min must be nonnegative and B finite"));
        }
        if self.beta_min * libm::sqrt(self.support_size as f64) > self.norm_bound * (1.0 + 1e-12) {
            return Err(config_error("infeasible: c1·sqrt(|J*|) exceeds B"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(config_error(
                "noise standard deviation must be finite and nonnegative",
            ));
        }
        if self.horizon == 0 || self.num_tasks == 0 {
            return Err(config_error("horizon and task count must be positive"));
        }
        Ok(())
    }

    pub fn atlas(&self) -> Result<FeatureAtlas> {
        let domain = self
            .domain
            .clone()
            .unwrap_or_else(|| self.family.default_domain());
        FeatureAtlas::new(self.family, self.num_groups, domain)
    }

    /// Largest admissible block norm, `B/√|J*|`.
    pub fn max_block_norm(&self) -> f64 {
        self.norm_bound / libm::sqrt(self.support_size as f64)
    }
}

/// Uniform `k`-subset of `{0, …, p−1}` by partial Fisher–Yates, sorted.
pub fn sample_true_support(num_groups: usize, k: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..num_groups).collect();
    let k = k.min(num_groups);
    for i in 0..k {
        let j = rng.random_range(i..num_groups);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

/// Coefficients `β*_s` of one task, concatenated over all groups.
///
/// Each active block gets a Gaussian direction and a norm drawn uniformly from
/// `[c₁, B/√|J*|]`, which guarantees both the beta-min condition and
/// `||β*_s|| ≤ B`. Inactive blocks are zero.
pub fn sample_reward_function(
    spec: &SyntheticSpec,
    offsets: &[usize],
    support: &[usize],
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let d = *offsets.last().unwrap();
    let mut beta = vec![0.0; d];
    let (lo, hi) = (spec.beta_min, spec.max_block_norm().max(spec.beta_min));
    for &j in support {
        let block = &mut beta[offsets[j]..offsets[j + 1]];
        let norm = loop {
            block
                .iter_mut()
                .for_each(|v| *v = rng.sample(StandardNormal));
            let n = linalg::norm(block);
            if n > 0.0 {
                break n;
            }
        };
        let target = if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        };
        block.iter_mut().for_each(|v| *v *= target / norm);
    }
    Ok(beta)
}

/// `f(x) = Σ_j β^(j)ᵀ φ_j(x)`.
pub fn eval_function(beta: &[f64], atlas: &FeatureAtlas, x: &[f64]) -> Result<f64> {
    Ok(linalg::dot(beta, &atlas.eval_concat(x)?))
}

/// `f(x) + N(0, σ²)`.
pub fn reward(
    beta: &[f64],
    atlas: &FeatureAtlas,
    x: &[f64],
    rng: &mut SimRng,
    sigma: f64,
) -> Result<f64> {
    let f = eval_function(beta, atlas, x)?;
    if sigma == 0.0 {
        return Ok(f);
    }
    let eps: f64 = rng.sample(StandardNormal);
    Ok(f + sigma * eps)
}

/// Exhaustive grid argmax; ties go to the lowest index.
pub fn optimum_on_grid(beta: &[f64], table: &FeatureTable) -> Result<(usize, f64)> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if beta.len() != table.dim() {
        return Err(Error::Shape {
            expected: table.dim(),
            found: beta.len(),
        });
    }
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..table.len() {
        let v = linalg::dot(beta, table.row(i));
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// Uniform point of a box.
pub fn sample_uniform_point(domain: &Domain, rng: &mut SimRng) -> Vec<f64> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(&lo, &hi)| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        })
        .collect()
}

/// One sampled synthetic environment: a shared support and per-task rewards.
#[derive(Debug, Clone)]
pub struct SyntheticEnvironment {
    spec: SyntheticSpec,
    atlas: FeatureAtlas,
    table: FeatureTable,
    support: Vec<usize>,
    coefficients: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
    optima: Vec<(usize, f64)>,
}

impl SyntheticEnvironment {
    /// Samples `J*` from the support stream and each task's coefficients from
    /// its own coefficient stream under `seed`.
    pub fn sample(spec: &SyntheticSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let atlas = spec.atlas()?;
        let support = sample_true_support(
            spec.num_groups,
            spec.support_size,
            &mut substream(seed, 0, Purpose::Support),
        );
        let coefficients = (0..spec.num_tasks)
            .map(|s| {
                let mut rng = substream(seed, s as u64, Purpose::Coefficients);
                sample_reward_function(spec, atlas.offsets(), &support, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(spec.clone(), atlas, support, coefficients)
    }

    /// Builds an environment from explicit coefficients.
    pub fn from_parts(
        spec: SyntheticSpec,
        atlas: FeatureAtlas,
        support: Vec<usize>,
        coefficients: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let grid = PointGrid::regular(atlas.domain(), spec.grid_resolution)?;
        let table = atlas.tabulate(&grid)?;
        let mut means = Vec::with_capacity(coefficients.len());
        let mut optima = Vec::with_capacity(coefficients.len());
        for beta in &coefficients {
            optima.push(optimum_on_grid(beta, &table)?);
            means.push(
                (0..table.len())
                    .map(|i| linalg::dot(beta, table.row(i)))
                    .collect(),
            );
        }
        Ok(SyntheticEnvironment {
            spec,
            atlas,
            table,
            support,
            coefficients,
            means,
            optima,
        })
    }

    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn atlas(&self) -> &FeatureAtlas {
        &self.atlas
    }

    pub fn coefficients(&self, task: usize) -> &[f64] {
        &self.coefficients[task]
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }
}

impl Environment for SyntheticEnvironment {
    fn num_tasks(&self) -> usize {
        self.coefficients.len()
    }

    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn candidates(&self) -> &FeatureTable {
        &self.table
    }

    fn mean_reward(&self, task: usize, candidate: usize) -> f64 {
        self.means[task][candidate]
    }

    fn noise_std(&self) -> f64 {
        self.spec.noise_std
    }

    fn optimum(&self, task: usize) -> (usize, f64) {
        self.optima[task]
    }

    fn true_support(&self) -> Option<&[usize]> {
        Some(&self.support)
    }
}

/// Objective values of many tasks tabulated on a shared configuration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupTable {
    axis_names: Vec<String>,
    task_names: Vec<String>,
    grid: PointGrid,
    columns: Vec<Vec<f64>>,
}

impl LookupTable {
    pub fn new(
        axis_names: Vec<String>,
        task_names: Vec<String>,
        grid: PointGrid,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if grid.is_empty() || columns.is_empty() {
            return Err(Error::EmptyTable);
        }
        if axis_names.len() != grid.dim() {
            return Err(Error::Shape {
                expected: grid.dim(),
                found: axis_names.len(),
            });
        }
        if task_names.len() != columns.len() {
            return Err(Error::Shape {
                expected: columns.len(),
                found: task_names.len(),
            });
        }
        for col in &columns {
            if col.len() != grid.len() {
                return Err(Error::Shape {
                    expected: grid.len(),
                    found: col.len(),
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("lookup table"));
            }
        }
        if grid.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lookup table"));
        }
        Ok(LookupTable {
            axis_names,
            task_names,
            grid,
            columns,
        })
    }

    pub fn axis_names(&self) -> &[String] {
        &self.axis_names
    }

    pub fn task_names(&self) -> &[String] {
        &self.task_names
    }

    pub fn grid(&self) -> &PointGrid {
        &self.grid
    }

    pub fn num_tasks(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, task: usize) -> Result<&[f64]> {
        self.columns
            .get(task)
            .map(Vec::as_slice)
            .ok_or(Error::MissingColumn {
                task,
                columns: self.columns.len(),
            })
    }

    /// Row nearest to `x` in Euclidean distance; ties go to the lowest row.
    pub fn nearest_row(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.grid.dim() {
            return Err(Error::PointDimension {
                expected: self.grid.dim(),
                found: x.len(),
            });
        }
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.grid.iter().enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        Ok(best.0)
    }

    /// Value of `task` at the grid point nearest to `x`.
    pub fn lookup_eval(&self, task: usize, x: &[f64]) -> Result<f64> {
        let col = self.column(task)?;
        Ok(col[self.nearest_row(x)?])
    }

    /// Smallest box holding every grid point.
    pub fn bounding_domain(&self) -> Result<Domain> {
        let dim = self.grid.dim();
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for p in self.grid.iter() {
            for k in 0..dim {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        Domain::new(lower, upper)
    }
}

/// Tasks backed by a lookup table; the table's rows are the candidates.
#[derive(Debug, Clone)]
pub struct LookupEnvironment {
    table: LookupTable,
    features: FeatureTable,
    noise_std: f64,
    horizon: usize,
    optima: Vec<(usize, f64)>,
}

impl LookupEnvironment {
    pub fn new(
        table: LookupTable,
        atlas: &FeatureAtlas,
        horizon: usize,
        noise_std: f64,
    ) -> Result<Self> {
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(config_error(
                "noise standard deviation must be finite and nonnegative",
            ));
        }
        if horizon == 0 {
            return Err(config_error("horizon must be positive"));
        }
        let features = atlas.tabulate(table.grid())?;
        let optima = table
            .columns
            .iter()
            .map(|col| {
                col.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |b, (i, &v)| if v > b.1 { (i, v) } else { b },
                    )
            })
            .collect();
        Ok(LookupEnvironment {
            table,
            features,
            noise_std,
            horizon,
            optima,
        })
    }

    pub fn table(&self) -> &LookupTable {
        &self.table
    }
}

impl Environment for LookupEnvironment {
    fn num_tasks(&self) -> usize {
        self.table.num_tasks()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn candidates(&self) -> &FeatureTable {
        &self.features
    }

    fn mean_reward(&self, task: usize, candidate: usize) -> f64 {
        self.table.columns[task][candidate]
    }

    fn noise_std(&self) -> f64 {
        self.noise_std
    }

    fn optimum(&self, task: usize) -> (usize, f64) {
        self.optima[task]
    }

    fn true_support(&self) -> Option<&[usize]> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn full_support_when_k_equals_p() {
        let mut rng = substream(1, 0, Purpose::Support);
        assert_eq!(sample_true_support(6, 6, &mut rng), vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn support_replays() {
        let a = sample_true_support(50, 5, &mut substream(9, 0, Purpose::Support));
        let b = sample_true_support(50, 5, &mut substream(9, 0, Purpose::Support));
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn degenerate_interval_gives_exact_norm() {
        let spec = SyntheticSpec {
            support_size: 1,
            beta_min: 10.0,
            norm_bound: 10.0,
            ..SyntheticSpec::default()
        };
        let atlas = spec.atlas().unwrap();
        let mut rng = substream(3, 0, Purpose::Coefficients);
        let beta = sample_reward_function(&spec, atlas.offsets(), &[7], &mut rng).unwrap();
        assert!((linalg::norm(&beta) - 10.0).abs() < 1e-12);
        assert!(beta.iter().enumerate().all(|(j, v)| j == 7 || *v == 0.0));
    }

    #[test]
    fn infeasible_spec_rejected() {
        let spec = SyntheticSpec {
            beta_min: 5.0,
            norm_bound: 10.0,
            support_size: 5,
            ..SyntheticSpec::default()
        };
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn single_cosine_optimum_at_zero() {
        let atlas = FeatureAtlas::with_default_domain(FeatureFamily::Cosine1D, 3).unwrap();
        let grid = PointGrid::regular(atlas.domain(), 11).unwrap();
        let table = atlas.tabulate(&grid).unwrap();
        let beta = [2.5, 0.0, 0.0];
        let (i, v) = optimum_on_grid(&beta, &table).unwrap();
        assert_eq!(grid.point(i), &[0.0]);
        assert!((v - 2.5).abs() < 1e-15);
        let (i, v) = optimum_on_grid(&[-2.5, 0.0, 0.0], &table).unwrap();
        assert_eq!(grid.point(i), &[1.0]);
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_reward_is_deterministic() {
        let atlas = FeatureAtlas::with_default_domain(FeatureFamily::Cosine1D, 2).unwrap();
        let mut rng = substream(0, 0, Purpose::Noise);
        let v = reward(&[1.0, 2.0], &atlas, &[0.0], &mut rng, 0.0).unwrap();
        assert_eq!(v, 3.0);
    }

    fn table_1d() -> LookupTable {
        let grid = PointGrid::from_coords(1, vec![0.0, 1.0, 2.0]).unwrap();
        LookupTable::new(
            vec!["x".to_string()],
            vec!["a".to_string(), "b".to_string()],
            grid,
            vec![vec![1.0, 2.0, 3.0], vec![-1.0, 5.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn lookup_nearest_and_ties() {
        let t = table_1d();
        assert_eq!(t.lookup_eval(0, &[1.0]).unwrap(), 2.0);
        assert_eq!(t.lookup_eval(0, &[0.5]).unwrap(), 1.0);
        assert_eq!(t.lookup_eval(1, &[1.6]).unwrap(), 0.0);
        assert!(matches!(
            t.lookup_eval(2, &[0.0]),
            Err(Error::MissingColumn { .. })
        ));
    }

    #[test]
    fn lookup_rejects_empty_and_nan() {
        let grid = PointGrid::from_coords(1, vec![]).unwrap();
        assert_eq!(
            LookupTable::new(vec!["x".into()], vec![], grid, vec![]),
            Err(Error::EmptyTable)
        );
        let grid = PointGrid::from_coords(1, vec![0.0]).unwrap();
        assert!(LookupTable::new(
            vec!["x".into()],
            vec!["a".into()],
            grid,
            vec![vec![f64::NAN]]
        )
        .is_err());
    }

    #[test]
    fn lookup_environment_optimum() {
        let t = table_1d();
        let domain = t.bounding_domain().unwrap();
        let atlas = FeatureAtlas::new(FeatureFamily::Cosine1D, 4, domain).unwrap();
        let env = LookupEnvironment::new(t, &atlas, 10, 0.0).unwrap();
        assert_eq!(env.optimum(1), (1, 5.0));
        assert_eq!(env.regret(1, 0), 6.0);
        assert!(env.true_support().is_none());
    }
}
