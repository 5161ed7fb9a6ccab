use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use libo_core::bandit::{
    info_gain_bound, realized_info_gain, BaseSolver, GpUcb, PosteriorState, UcbConfig,
};
use libo_core::environment::{Environment, SyntheticEnvironment, SyntheticSpec};
use libo_core::features::KernelEstimate;
use libo_core::rng::{substream, Purpose};

/// Kernel-form posterior: `μ = kᵀ(K + λ²I)⁻¹y`, `σ² = k(x,x) − kᵀ(K + λ²I)⁻¹k`.
fn dual_posterior(rows: &[Vec<f64>], ys: &[f64], phi: &[f64], lambda: f64) -> (f64, f64) {
    let t = rows.len();
    let d = phi.len();
    if t == 0 {
        return (0.0, phi.iter().map(|v| v * v).sum());
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let x = DMatrix::from_row_slice(t, d, &flat);
    let gram = &x * x.transpose() + DMatrix::identity(t, t) * (lambda * lambda);
    let k = &x * DVector::from_column_slice(phi);
    let chol = gram.cholesky().unwrap();
    let alpha = chol.solve(&DVector::from_column_slice(ys));
    let v = chol.solve(&k);
    let kxx: f64 = phi.iter().map(|v| v * v).sum();
    (k.dot(&alpha), kxx - k.dot(&v))
}

#[test]
fn primal_and_dual_posteriors_agree() {
    let mut rng = substream(7, 0, Purpose::Design);
    for case in 0..100 {
        let d = rng.random_range(1..=8);
        let t = rng.random_range(0..=20);
        let lambda = rng.random_range(0.05..2.0);
        let mut state = PosteriorState::new(d, lambda);
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..t {
            let phi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = rng.random_range(-3.0..3.0);
            state.observe(&phi, y).unwrap();
            rows.push(phi);
            ys.push(y);
        }
        for _ in 0..5 {
            let phi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (mp, vp) = state.posterior_mean_var(&phi).unwrap();
            let (md, vd) = dual_posterior(&rows, &ys, &phi, lambda);
            assert!((mp - md).abs() <= 1e-8, "case {case}: mean {mp} vs {md}");
            assert!((vp - vd).abs() <= 1e-8, "case {case}: var {vp} vs {vd}");
        }
    }
}

#[test]
fn small_regularizer_interpolates_observations() {
    let mut rng = substream(11, 0, Purpose::Design);
    let d = 6;
    let mut state = PosteriorState::new(d, 1e-4);
    let mut data = Vec::new();
    for _ in 0..4 {
        let phi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = rng.random_range(-1.0..1.0);
        state.observe(&phi, y).unwrap();
        data.push((phi, y));
    }
    for (phi, y) in &data {
        let (mean, var) = state.posterior_mean_var(phi).unwrap();
        assert!((mean - y).abs() < 1e-5, "{mean} vs {y}");
        assert!(var < 1e-6);
    }
}

proptest! {
    #[test]
    fn variance_is_bounded_by_prior(
        obs in proptest::collection::vec((proptest::collection::vec(-1.0f64..1.0, 4), -2.0f64..2.0), 0..20),
        query in proptest::collection::vec(-1.0f64..1.0, 4),
        lambda in 0.01f64..3.0,
    ) {
        let mut state = PosteriorState::new(4, lambda);
        for (phi, y) in &obs {
            state.observe(phi, *y).unwrap();
        }
        let (_, var) = state.posterior_mean_var(&query).unwrap();
        let prior: f64 = query.iter().map(|v| v * v).sum();
        prop_assert!(var >= 0.0);
        prop_assert!(var <= prior * (1.0 + 1e-10) + 1e-14);
    }

    #[test]
    fn information_gain_respects_bound(
        obs in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 0..40),
        lambda in 0.05f64..2.0,
    ) {
        // Features scaled to unit kernel diagonal at most.
        let d = 3;
        let mut state = PosteriorState::new(d, lambda);
        let mut rows = Vec::new();
        for phi in &obs {
            let n: f64 = phi.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let phi: Vec<f64> = phi.iter().map(|v| v / n).collect();
            state.observe(&phi, 0.0).unwrap();
            rows.push(phi);
        }
        let t = rows.len();
        let gram: Vec<f64> = (0..t * t)
            .map(|k| rows[k / t].iter().zip(&rows[k % t]).map(|(a, b)| a * b).sum())
            .collect();
        let direct = realized_info_gain(&gram, t, lambda).unwrap();
        prop_assert!((direct - state.realized_info_gain()).abs() <= 1e-8 * (1.0 + direct));
        prop_assert!(direct <= info_gain_bound(d, t, lambda) + 1e-9);
    }
}

fn small_env(seed: u64, horizon: usize) -> SyntheticEnvironment {
    let spec = SyntheticSpec {
        num_groups: 10,
        support_size: 3,
        norm_bound: 3.0,
        beta_min: 0.5,
        noise_std: 0.1,
        horizon,
        num_tasks: 1,
        grid_resolution: 200,
        ..SyntheticSpec::default()
    };
    SyntheticEnvironment::sample(&spec, seed).unwrap()
}

fn play(
    env: &SyntheticEnvironment,
    seed: u64,
    steps: usize,
    config: UcbConfig,
) -> (Vec<usize>, Vec<f64>) {
    let estimate =
        KernelEstimate::new(env.support().iter().copied(), env.atlas().num_groups()).unwrap();
    let mut solver = GpUcb::new(env.candidates(), &estimate, config).unwrap();
    let mut noise = substream(seed, 0, Purpose::Noise);
    let mut picks = Vec::new();
    let mut regrets = Vec::new();
    for _ in 0..steps {
        let c = solver.select();
        let y = env.sample_reward(0, c, &mut noise);
        solver.observe(c, y).unwrap();
        picks.push(c);
        regrets.push(env.regret(0, c));
    }
    (picks, regrets)
}

#[test]
fn ucb_settles_near_the_maximizer() {
    let config = UcbConfig {
        grid_resolution: 200,
        nu: libo_core::bandit::ExplorationCoefficient::Constant(2.0),
        ..UcbConfig::default()
    };
    for seed in 0..5 {
        let env = small_env(seed, 200);
        let (_, regrets) = play(&env, seed, 200, config);
        let (_, best) = env.optimum(0);
        let spread = best
            - (0..env.candidates().len())
                .map(|c| env.mean_reward(0, c))
                .fold(f64::INFINITY, f64::min);
        let tail = regrets[180..].iter().sum::<f64>() / 20.0;
        assert!(
            tail < 0.05 * spread,
            "seed {seed}: tail regret {tail}, spread {spread}"
        );
    }
}

#[test]
fn average_regret_shrinks_with_horizon() {
    let config = UcbConfig {
        grid_resolution: 200,
        ..UcbConfig::default()
    };
    let mut early = 0.0;
    let mut late = 0.0;
    for seed in 0..20 {
        let env = small_env(seed, 400);
        let (_, regrets) = play(&env, seed, 400, config);
        early += regrets[..50].iter().sum::<f64>() / 50.0;
        late += regrets.iter().sum::<f64>() / 400.0;
    }
    assert!(late < early, "R(400)/400 = {late}, R(50)/50 = {early}");
}
