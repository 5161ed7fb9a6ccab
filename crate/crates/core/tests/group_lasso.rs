use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use libo_core::environment::SyntheticSpec;
use libo_core::meta_kgl::{
    critical_lambda, group_lasso_fit, meta_loss, recovery_trial, run_meta_kgl, GroupCoefficients,
    PooledDesign, SolverOptions,
};

#[derive(Debug, Clone)]
struct Instance {
    dims: Vec<usize>,
    /// Per task: row-major features and targets.
    tasks: Vec<(Vec<f64>, Vec<f64>)>,
    lambda: f64,
}

impl Instance {
    fn design(&self) -> PooledDesign {
        let mut d = PooledDesign::new(&self.dims);
        for (x, y) in &self.tasks {
            d.push_task(x.clone(), y.clone()).unwrap();
        }
        d
    }

    fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }
}

fn instance() -> impl Strategy<Value = Instance> {
    (
        proptest::collection::vec(1usize..=2, 1..=4),
        1usize..=3,
        1usize..=8,
        0.01f64..1.0,
    )
        .prop_flat_map(|(dims, m, n, lambda)| {
            let d: usize = dims.iter().sum();
            let task = (
                proptest::collection::vec(-1.0f64..1.0, n * d),
                proptest::collection::vec(-2.0f64..2.0, n),
            );
            (Just(dims), proptest::collection::vec(task, m), Just(lambda))
        })
        .prop_map(|(dims, tasks, lambda)| Instance {
            dims,
            tasks,
            lambda,
        })
}

/// Independent optimality check built from dense matrices.
fn kkt_violation(inst: &Instance, beta: &GroupCoefficients) -> f64 {
    let d = inst.total_dim();
    let n_total: usize = inst.tasks.iter().map(|(_, y)| y.len()).sum();
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(inst.dims.iter().scan(0, |acc, &k| {
            *acc += k;
            Some(*acc)
        }))
        .collect();
    let grads: Vec<DVector<f64>> = inst
        .tasks
        .iter()
        .enumerate()
        .map(|(s, (x, y))| {
            let phi = DMatrix::from_row_slice(y.len(), d, x);
            let b = DVector::from_column_slice(beta.task(s));
            let r = &phi * b - DVector::from_column_slice(y);
            phi.transpose() * r * (2.0 / n_total as f64)
        })
        .collect();
    let mut worst = 0.0_f64;
    for j in 0..inst.dims.len() {
        let range = offsets[j]..offsets[j + 1];
        let block_norm: f64 = (0..inst.tasks.len())
            .flat_map(|s| beta.task(s)[range.clone()].to_vec())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let v = if block_norm > 0.0 {
            (0..inst.tasks.len())
                .flat_map(|s| {
                    range
                        .clone()
                        .map(|k| grads[s][k] + inst.lambda * beta.task(s)[k] / block_norm)
                        .collect::<Vec<_>>()
                })
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        } else {
            let g: f64 = (0..inst.tasks.len())
                .flat_map(|s| range.clone().map(|k| grads[s][k]).collect::<Vec<_>>())
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            (g - inst.lambda).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_pass_the_kkt_certificate(inst in instance()) {
        let design = inst.design();
        let (beta, report) = group_lasso_fit(&design, inst.lambda, &SolverOptions::default()).unwrap();
        prop_assert!(report.converged);
        let v = kkt_violation(&inst, &beta);
        prop_assert!(v <= 1e-6, "kkt violation {v}");
    }

    #[test]
    fn objective_is_no_worse_than_zero(inst in instance()) {
        let design = inst.design();
        let (beta, _) = group_lasso_fit(&design, inst.lambda, &SolverOptions::default()).unwrap();
        let zero = GroupCoefficients::zeros(inst.tasks.len(), design.offsets());
        prop_assert!(
            meta_loss(&design, &beta, inst.lambda).unwrap()
                <= meta_loss(&design, &zero, inst.lambda).unwrap() + 1e-12
        );
    }

    #[test]
    fn above_critical_lambda_everything_is_zero(inst in instance(), margin in 1.0f64..3.0) {
        let design = inst.design();
        let lambda = critical_lambda(&design).unwrap() * margin + 1e-12;
        let (beta, _) = group_lasso_fit(&design, lambda, &SolverOptions::default()).unwrap();
        prop_assert!(beta.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn joint_rescaling_scales_group_norms(inst in instance()) {
        let c = 2.0;
        let design = inst.design();
        let mut scaled = inst.clone();
        scaled.tasks.iter_mut().for_each(|(_, y)| y.iter_mut().for_each(|v| *v *= c));
        scaled.lambda *= c;
        let opts = SolverOptions { tol: 1e-11, max_iter: 200_000 };
        let (a, _) = group_lasso_fit(&design, inst.lambda, &opts).unwrap();
        let (b, _) = group_lasso_fit(&scaled.design(), scaled.lambda, &opts).unwrap();
        for (na, nb) in a.group_norms().iter().zip(b.group_norms()) {
            prop_assert!((c * na - nb).abs() <= 1e-6 * (1.0 + nb.abs()), "{na} {nb}");
        }
    }

    #[test]
    fn task_order_does_not_matter(inst in instance()) {
        let mut rev = inst.clone();
        rev.tasks.reverse();
        let opts = SolverOptions { tol: 1e-11, max_iter: 200_000 };
        let a = run_meta_kgl(&inst.design(), 0.1, inst.lambda, &opts).unwrap();
        let b = run_meta_kgl(&rev.design(), 0.1, inst.lambda, &opts).unwrap();
        for (na, nb) in a.group_norms.iter().zip(&b.group_norms) {
            prop_assert!((na - nb).abs() <= 1e-8 * (1.0 + na.abs()), "{na} {nb}");
        }
        let near_cut = a.group_norms.iter().any(|g| (g - 0.1 * (inst.tasks.len() as f64).sqrt()).abs() < 1e-6);
        if !near_cut {
            prop_assert_eq!(a.estimate, b.estimate);
        }
    }
}

#[test]
fn unregularized_full_rank_keeps_every_least_squares_group() {
    // 2 tasks, 3 scalar groups, 5 rows each; least squares is unique.
    let rows = [
        [1.0, 0.2, -0.3],
        [0.1, 1.0, 0.4],
        [-0.5, 0.3, 1.0],
        [0.7, -0.8, 0.2],
        [0.3, 0.3, -0.9],
    ];
    let mut design = PooledDesign::new(&[1, 1, 1]);
    let truth = [[1.0, -2.0, 0.5], [0.3, 0.0, 2.0]];
    let mut ls_norms = [0.0; 3];
    for b in &truth {
        let x: Vec<f64> = rows.iter().flatten().copied().collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(b).map(|(a, c)| a * c).sum())
            .collect();
        let phi = DMatrix::from_row_slice(5, 3, &x);
        let ls = (phi.transpose() * &phi).try_inverse().unwrap()
            * phi.transpose()
            * DVector::from_vec(y.clone());
        for j in 0..3 {
            ls_norms[j] += ls[j] * ls[j];
        }
        design.push_task(x, y).unwrap();
    }
    let opts = SolverOptions {
        tol: 1e-12,
        max_iter: 500_000,
    };
    let (beta, _) = group_lasso_fit(&design, 0.0, &opts).unwrap();
    for (j, ls) in ls_norms.iter().enumerate() {
        assert!(*ls > 0.0);
        assert!((beta.group_norm(j) - ls.sqrt()).abs() < 1e-6);
    }
}

#[test]
fn noiseless_single_group_is_selected() {
    // Group 0 carries all the signal; ω is half the true block norm over √m.
    let m = 5;
    let n = 20;
    let p = 6;
    let mut design = PooledDesign::new(&vec![1; p]);
    let mut block_sq = 0.0;
    for s in 0..m {
        let coef = 1.0 + 0.25 * s as f64;
        block_sq += coef * coef;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64 + 0.013 * s as f64;
            let row: Vec<f64> = (1..=p)
                .map(|j| (j as f64 * std::f64::consts::PI * t).cos())
                .collect();
            y.push(coef * row[0]);
            x.extend(row);
        }
        design.push_task(x, y).unwrap();
    }
    let omega = 0.5 * block_sq.sqrt() / (m as f64).sqrt();
    let out = run_meta_kgl(&design, omega, 1e-3, &SolverOptions::default()).unwrap();
    assert!(!out.fallback);
    assert_eq!(out.estimate.selected(), &[0]);
}

#[test]
fn noiseless_recovery_with_moderate_data() {
    let spec = SyntheticSpec {
        noise_std: 0.0,
        ..SyntheticSpec::default()
    };
    for seed in 0..3 {
        let t = recovery_trial(&spec, 10, 50, 0.25, 0.01, seed, &SolverOptions::default()).unwrap();
        assert!(
            t.recovered,
            "seed {seed}: {:?} vs {:?}",
            t.outcome.estimate.selected(),
            t.true_support
        );
    }
}

#[test]
fn one_sample_one_task_does_not_recover() {
    let spec = SyntheticSpec::default();
    let hits = (0..20)
        .filter(|&seed| {
            recovery_trial(&spec, 1, 1, 0.25, 0.25, seed, &SolverOptions::default())
                .unwrap()
                .recovered
        })
        .count();
    assert_eq!(hits, 0);
}
