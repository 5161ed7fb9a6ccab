use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use libo_core::features::{FeatureAtlas, FeatureFamily, KernelEstimate};

fn family() -> impl Strategy<Value = FeatureFamily> {
    prop_oneof![
        Just(FeatureFamily::Cosine1D),
        Just(FeatureFamily::Legendre1D),
        Just(FeatureFamily::CosineTensor2D),
    ]
}

/// Atlas, a non-empty selection, and in-domain points in `[0, 1]`-coordinates.
fn instance() -> impl Strategy<Value = (FeatureAtlas, KernelEstimate, Vec<Vec<f64>>)> {
    (family(), 1usize..20).prop_flat_map(|(fam, p)| {
        let atlas = FeatureAtlas::with_default_domain(fam, p).unwrap();
        let dim = fam.input_dim();
        (
            Just(atlas),
            proptest::collection::btree_set(0..p, 1..=p),
            proptest::collection::vec(proptest::collection::vec(0.0..=1.0f64, dim), 1..12),
        )
            .prop_map(move |(atlas, sel, unit_pts)| {
                let d = atlas.domain().clone();
                let pts = unit_pts
                    .into_iter()
                    .map(|u| {
                        u.iter()
                            .enumerate()
                            .map(|(k, t)| d.lower()[k] + t * (d.upper()[k] - d.lower()[k]))
                            .collect()
                    })
                    .collect();
                let est = KernelEstimate::new(sel, atlas.num_groups()).unwrap();
                (atlas, est, pts)
            })
    })
}

fn gram(atlas: &FeatureAtlas, est: &KernelEstimate, pts: &[Vec<f64>]) -> DMatrix<f64> {
    let n = pts.len();
    DMatrix::from_fn(n, n, |i, j| {
        est.kernel_eval(atlas, &pts[i], &pts[j]).unwrap()
    })
}

proptest! {
    #[test]
    fn gram_is_positive_semidefinite((atlas, est, pts) in instance()) {
        let k = gram(&atlas, &est, &pts);
        let min = k.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-9, "min eigenvalue {min}");
    }

    #[test]
    fn kernel_diagonal_is_bounded((atlas, est, pts) in instance()) {
        for x in &pts {
            prop_assert!(est.kernel_eval(&atlas, x, x).unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn gram_equals_selected_feature_products((atlas, est, pts) in instance()) {
        let cols = est.active_columns(atlas.offsets());
        let n = pts.len();
        let phi = DMatrix::from_fn(n, cols.len(), |i, c| atlas.eval_concat(&pts[i]).unwrap()[cols[c]]);
        let expected = &phi * phi.transpose() / est.len() as f64;
        let k = gram(&atlas, &est, &pts);
        prop_assert!((k - expected).abs().max() <= 1e-12);
    }

    #[test]
    fn kernel_is_symmetric((atlas, est, pts) in instance()) {
        let x = &pts[0];
        let y = pts.last().unwrap();
        prop_assert_eq!(est.kernel_eval(&atlas, x, y).unwrap(), est.kernel_eval(&atlas, y, x).unwrap());
    }

    #[test]
    fn concat_matches_per_group_calls((atlas, _est, pts) in instance()) {
        for x in &pts {
            let joined: Vec<f64> = (0..atlas.num_groups())
                .flat_map(|j| atlas.eval_feature(j, x).unwrap())
                .collect();
            prop_assert_eq!(atlas.eval_concat(x).unwrap(), joined);
        }
    }
}

#[test]
fn cosine_cross_moments_vanish_on_uniform_samples() {
    let p = 6;
    let atlas = FeatureAtlas::with_default_domain(FeatureFamily::Cosine1D, p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let mut moments = vec![0.0; p * p];
    for _ in 0..n {
        let x: f64 = rng.random();
        let phi = atlas.eval_concat(&[x]).unwrap();
        for a in 0..p {
            for b in 0..p {
                moments[a * p + b] += phi[a] * phi[b] / n as f64;
            }
        }
    }
    for a in 0..p {
        for b in 0..p {
            if a != b {
                assert!(
                    moments[a * p + b].abs() < 0.02,
                    "({a},{b}) {}",
                    moments[a * p + b]
                );
            } else {
                assert_abs_diff_eq!(moments[a * p + b], 0.5, epsilon = 0.02);
            }
        }
    }
}
