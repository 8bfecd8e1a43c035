use std::sync::Arc;

use fsvd_core::data::{read_long_csv, write_long_csv, FunctionalDataset, IngestOptions, SubjectSeries};
use fsvd_core::decomposition::{fsvd, model_basis, FitConfig, FsvdModel, MAX_RANK};
use fsvd_core::io::{model_from_json, model_to_json};
use fsvd_core::parallel::with_threads;
use fsvd_core::selection::{aic_values, cv_select_nu, default_nu_grid, select_rank_aic, select_rank_ratio};
use fsvd_core::simlab::{
    adjusted_rand_index, dist_functions, dist_vectors, gen_clustering, gen_completion, gen_factor, nmse_loadings,
};
use fsvd_core::spline::{SplineBasis, SplineFunction};
use fsvd_core::tasks::{cluster, complete, factor_model, regress, EmConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn knots_strategy(max: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.001f64..0.999, 1..max).prop_map(|mut v| {
        v.push(0.0);
        v.push(1.0);
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        v
    })
}

fn spline_with(knots: Vec<f64>, seed: u64) -> SplineFunction {
    let basis = Arc::new(SplineBasis::new(knots).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..basis.len()).map(|_| rng.sample(StandardNormal)).collect();
    SplineFunction::from_values(basis, vals).unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    s * h / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn roughness_matches_dense_penalty(knots in knots_strategy(30), seed in 0u64..1000) {
        let f = spline_with(knots, seed);
        let v = DVector::from_column_slice(f.values());
        let dense = (v.transpose() * f.basis().penalty() * &v)[(0, 0)];
        prop_assert!((f.roughness() - dense).abs() <= 1e-6 * dense.abs().max(1.0));
        let c = 2.5;
        prop_assert!((f.scaled(c).roughness() - c * c * f.roughness()).abs() <= 1e-9 * f.roughness().max(1.0));
    }

    #[test]
    fn linear_functions_have_no_roughness(knots in knots_strategy(30), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let basis = Arc::new(SplineBasis::new(knots.clone()).unwrap());
        let f = SplineFunction::from_values(basis, knots.iter().map(|t| a + b * t).collect()).unwrap();
        prop_assert!(f.roughness().abs() < 1e-6 * (1.0 + a * a + b * b));
        for t in [0.0, 0.123, 0.5, 0.999] {
            prop_assert!((f.evaluate(t) - (a + b * t)).abs() < 1e-12 * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn interpolation_at_knots(knots in knots_strategy(40), seed in 0u64..1000) {
        let f = spline_with(knots, seed);
        for (t, g) in f.basis().knots().iter().zip(f.values()) {
            prop_assert!((f.evaluate(*t) - g).abs() <= 1e-12);
        }
    }

    #[test]
    fn gram_against_simpson(knots in knots_strategy(12), s1 in 0u64..1000, s2 in 0u64..1000) {
        let f = spline_with(knots.clone(), s1);
        let h = spline_with(knots, s2 + 5000);
        let brute = simpson(|t| f.evaluate(t) * h.evaluate(t), 100_000);
        let ip = f.l2_inner(&h).unwrap();
        prop_assert!((ip - brute).abs() <= 1e-6, "{} vs {}", ip, brute);
        prop_assert!((ip - h.l2_inner(&f).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn long_csv_round_trip_is_bit_exact(
        rows in proptest::collection::vec(
            proptest::collection::vec((0.0f64..=1.0, -1e6f64..1e6), 1..8),
            1..6,
        )
    ) {
        let subjects: Vec<SubjectSeries> = rows
            .iter()
            .enumerate()
            .map(|(i, pts)| {
                let (t, v): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
                SubjectSeries::from_pairs(format!("id{i}"), &t, &v)
            })
            .collect();
        let ds = FunctionalDataset::new(subjects).unwrap();
        let mut buf = Vec::new();
        write_long_csv(&ds, &mut buf).unwrap();
        let opts = IngestOptions { rescale_time: false, ..IngestOptions::default() };
        let (back, _, _) = read_long_csv(&buf[..], &opts).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn dist_is_sign_and_scale_invariant(u in proptest::collection::vec(-10.0f64..10.0, 3..20), c in 0.1f64..10.0) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3));
        let v: Vec<f64> = u.iter().map(|x| -c * x).collect();
        prop_assert!(dist_vectors(&u, &v).unwrap() < 1e-6);
        prop_assert!(dist_functions(&u, &v).unwrap() < 1e-6);
    }

    #[test]
    fn ari_ignores_label_names(labels in proptest::collection::vec(0usize..4, 2..60), other in proptest::collection::vec(0usize..4, 60)) {
        let other = &other[..labels.len()];
        let renamed: Vec<usize> = labels.iter().map(|&l| [3, 1, 0, 2][l]).collect();
        let a = adjusted_rand_index(&labels, other).unwrap();
        let b = adjusted_rand_index(&renamed, other).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((adjusted_rand_index(&labels, &renamed).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn procrustes_absorbs_rotation(seed in 0u64..1000, k in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Vec<f64>> = (0..25).map(|_| (0..k).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let q = DMatrix::<f64>::from_fn(k, k, |_, _| rng.sample(StandardNormal)).qr().q();
        let rot: Vec<Vec<f64>> = a
            .iter()
            .map(|r| (0..k).map(|j| (0..k).map(|l| r[l] * q[(l, j)]).sum()).collect())
            .collect();
        prop_assert!(nmse_loadings(&a, &rot).unwrap() < 1e-10);
    }

    #[test]
    fn ratio_rule_is_scale_invariant(mut rhos in proptest::collection::vec(0.01f64..100.0, 2..12), c in 0.001f64..1000.0) {
        rhos.sort_by(|a, b| b.total_cmp(a));
        let scaled: Vec<f64> = rhos.iter().map(|r| r * c).collect();
        prop_assert_eq!(select_rank_ratio(&rhos, MAX_RANK).unwrap(), select_rank_ratio(&scaled, MAX_RANK).unwrap());
    }
}

/// Y_ij = ρ a_i φ(T_ij) with φ a spline on the knot set and each subject
/// observed on a random subset of knots.
fn noiseless_rank_one(n: usize, seed: u64) -> (FunctionalDataset, Vec<f64>, SplineFunction) {
    let knots: Vec<f64> = (0..25).map(|k| k as f64 / 24.0).collect();
    let basis = Arc::new(SplineBasis::new(knots.clone()).unwrap());
    let phi = SplineFunction::from_values(
        basis,
        knots.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin() + 0.5 * t).collect(),
    )
    .unwrap();
    let phi = phi.scaled(1.0 / phi.l2_norm());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64 * 0.7).sin()).collect();
    let subjects = (0..n)
        .map(|i| {
            let mut t: Vec<f64> = knots.iter().copied().filter(|_| rng.random::<f64>() < 0.4).collect();
            if i == 0 {
                t = knots.clone();
            }
            if t.len() < 2 {
                t = vec![knots[3], knots[17]];
            }
            let y: Vec<f64> = t.iter().map(|&s| 3.0 * a[i] * phi.evaluate(s)).collect();
            SubjectSeries::from_pairs(format!("s{i}"), &t, &y)
        })
        .collect();
    (FunctionalDataset::new(subjects).unwrap(), a, phi)
}

#[test]
fn noiseless_rank_one_recovery_and_completion() {
    let (ds, a, phi) = noiseless_rank_one(30, 1);
    let cfg = FitConfig { tau: 1e-12, max_iter: 2000, ..FitConfig::default() };
    let model = fsvd(&ds, &cfg.with_rank(1).with_nu(1e-12)).unwrap();
    let c = &model.components[0];
    assert!(dist_vectors(&c.a, &a).unwrap() < 1e-4);
    let grid: Vec<f64> = (0..201).map(|k| k as f64 / 200.0).collect();
    assert!(dist_functions(&c.phi.evaluate_many(&grid), &phi.evaluate_many(&grid)).unwrap() < 1e-4);
    for (i, s) in ds.subjects().iter().enumerate() {
        let times = s.times();
        let fitted = complete(&model, i, &times).unwrap();
        for (f, y) in fitted.iter().zip(s.values()) {
            assert!((f - y).abs() < 1e-6, "{f} vs {y}");
        }
    }
}

#[test]
fn noiseless_cv_prefers_smallest_penalty() {
    let (ds, _, _) = noiseless_rank_one(30, 2);
    let basis = Arc::new(model_basis(&ds, 200).unwrap());
    let a0 = fsvd_core::decomposition::initialize_vector(&ds, &[]).unwrap();
    let grid = default_nu_grid();
    let cfg = FitConfig::default();
    let cv = cv_select_nu(&ds, &basis, &a0, &grid, &cfg).unwrap();
    assert_eq!(cv.best_nu, grid[0]);
    for w in cv.errors[1..].windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-9), "{:?}", cv.errors);
    }
    let single = cv_select_nu(&ds, &basis, &a0, &[1e-3], &cfg).unwrap();
    assert_eq!(single.best_nu, 1e-3);
    assert_eq!(single.errors.len(), 1);
}

#[test]
fn cv_grid_order_does_not_matter() {
    let (ds, _) = gen_completion(40, 4, 8, false, 11).unwrap();
    let basis = Arc::new(model_basis(&ds, 200).unwrap());
    let a0 = fsvd_core::decomposition::initialize_vector(&ds, &[]).unwrap();
    let grid = default_nu_grid();
    let perm: Vec<usize> = (0..grid.len()).map(|k| (k * 7 + 3) % grid.len()).collect();
    let shuffled: Vec<f64> = perm.iter().map(|&k| grid[k]).collect();
    let cfg = FitConfig::default();
    let a = cv_select_nu(&ds, &basis, &a0, &grid, &cfg).unwrap();
    let b = cv_select_nu(&ds, &basis, &a0, &shuffled, &cfg).unwrap();
    assert_eq!(a.best_nu, b.best_nu);
    for (pos, &k) in perm.iter().enumerate() {
        assert_eq!(b.errors[pos].to_bits(), a.errors[k].to_bits());
    }
}

fn rank_two_noiseless() -> FunctionalDataset {
    let grid: Vec<f64> = (0..15).map(|k| k as f64 / 14.0).collect();
    let subjects = (0..25)
        .map(|i| {
            let x = i as f64 / 24.0;
            let y: Vec<f64> = grid
                .iter()
                .map(|t| 3.0 * (1.0 + x) + 2.0 * (5.0 * x).sin() * (2.0 * std::f64::consts::PI * t).sin())
                .collect();
            SubjectSeries::from_pairs(format!("s{i}"), &grid, &y)
        })
        .collect();
    FunctionalDataset::new(subjects).unwrap()
}

#[test]
fn aic_finds_exact_rank_two() {
    let ds = rank_two_noiseless();
    let model = fsvd(&ds, &FitConfig::default().with_rank(4).with_nu(1e-8)).unwrap();
    let aic = aic_values(&ds, &model, 4).unwrap();
    assert!(aic[1] < aic[0], "{aic:?}");
    assert!(aic.iter().all(|v| v.is_finite()));
    assert_eq!(select_rank_aic(&ds, &model, 1).unwrap(), 1);
}

fn fitted_model(seed: u64) -> (FunctionalDataset, FsvdModel) {
    let (ds, _) = gen_completion(40, 6, 10, false, seed).unwrap();
    let model = fsvd(&ds, &FitConfig::default().with_rank(3).with_nu(1e-5)).unwrap();
    (ds, model)
}

#[test]
fn completion_is_linear_in_components() {
    let (_, model) = fitted_model(4);
    let times = [0.0, 0.17, 0.5, 0.83, 1.0];
    let part = |keep: &[usize]| {
        let mut m = model.clone();
        m.components = keep.iter().map(|&r| model.components[r].clone()).collect();
        m
    };
    let (m1, m23) = (part(&[0]), part(&[1, 2]));
    for i in [0, 7, 39] {
        let full = complete(&model, i, &times).unwrap();
        let x = complete(&m1, i, &times).unwrap();
        let y = complete(&m23, i, &times).unwrap();
        for k in 0..times.len() {
            assert!((full[k] - x[k] - y[k]).abs() < 1e-12);
        }
    }
    let mut empty = model.clone();
    empty.truncate(0);
    assert!(complete(&empty, 3, &times).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn factor_signal_is_rotation_invariant() {
    let (ds, _) = gen_factor(60, 8, 12, 2).unwrap();
    let model = fsvd(&ds, &FitConfig::default().with_rank(3).with_nu(1e-5)).unwrap();
    let base = factor_model(&model, 3, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = DMatrix::<f64>::from_fn(3, 3, |_, _| rng.sample(StandardNormal)).qr().q();
    let rotated = factor_model(&model, 3, Some(&q)).unwrap();
    for i in [0, 10, 59] {
        for t in [0.0, 0.3, 0.71, 1.0] {
            assert!((base.signal(i, t) - rotated.signal(i, t)).abs() < 1e-8);
            let fitted: f64 = model.components.iter().map(|c| c.value(i, t)).sum();
            assert!((base.signal(i, t) - fitted).abs() < 1e-8);
        }
    }
    let col: Vec<f64> = base.loadings.iter().map(|r| r[0]).collect();
    assert!(dist_vectors(&col, &model.components[0].a).unwrap() < 1e-10);
}

#[test]
fn regression_exact_responses() {
    let (_, model) = fitted_model(5);
    let n = model.n();
    let fit = regress(&model, &vec![1.7; n], 3).unwrap();
    assert!((fit.alpha - 1.7).abs() < 1e-8);
    assert!(fit.beta_coeffs.iter().all(|b| b.abs() <= 1e-8));

    let xi = model.scores(1);
    let z: Vec<f64> = xi.iter().map(|r| 2.0 * r[0]).collect();
    let fit = regress(&model, &z, 3).unwrap();
    assert!(fit.alpha.abs() < 1e-8);
    assert!((fit.beta_coeffs[0] - 2.0).abs() < 1e-8);
    assert!(fit.beta_coeffs[1].abs() < 1e-8 && fit.beta_coeffs[2].abs() < 1e-8);
}

#[test]
fn regression_ignores_component_signs() {
    let (_, model) = fitted_model(6);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z: Vec<f64> = (0..model.n()).map(|_| rng.sample(StandardNormal)).collect();
    let mut flipped = model.clone();
    let c = &mut flipped.components[1];
    c.a.iter_mut().for_each(|x| *x = -*x);
    c.phi = c.phi.scaled(-1.0);
    let a = regress(&model, &z, 3).unwrap();
    let b = regress(&flipped, &z, 3).unwrap();
    for t in [0.0, 0.4, 1.0] {
        assert!((a.beta_fn.evaluate(t) - b.beta_fn.evaluate(t)).abs() < 1e-10);
    }
    for (x, y) in a.fitted.iter().zip(&b.fitted) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn single_cluster_is_trivial() {
    let (ds, _) = gen_clustering(40, 6, 10, 1, 2).unwrap();
    let model = fsvd(&ds, &FitConfig::default().with_rank(3).with_nu(1e-5)).unwrap();
    let fit = cluster(&ds, &model, 1, 3, &EmConfig::default()).unwrap();
    assert_eq!(fit.pi, vec![1.0]);
    assert!(fit.labels.iter().all(|&l| l == 0));
    assert!(fit.responsibilities.iter().all(|r| r == &vec![1.0]));
}

#[test]
fn separable_mixture_is_recovered_by_initialization() {
    // Two groups whose scores differ by 10x their spread; no noise.
    let grid: Vec<f64> = (0..12).map(|k| k as f64 / 11.0).collect();
    let mut truth = Vec::new();
    let subjects = (0..40)
        .map(|i| {
            let g = i % 2;
            truth.push(g);
            let center = if g == 0 { 10.0 } else { -10.0 };
            let jitter = 0.5 * ((i as f64) * 1.3).sin();
            let y: Vec<f64> = grid
                .iter()
                .map(|t| {
                    (center + jitter) * (2.0 * std::f64::consts::PI * t).sin()
                        + (1.0 + jitter) * (2.0 * std::f64::consts::PI * t).cos()
                })
                .collect();
            SubjectSeries::from_pairs(format!("s{i}"), &grid, &y)
        })
        .collect();
    let ds = FunctionalDataset::new(subjects).unwrap();
    let model = fsvd(&ds, &FitConfig::default().with_rank(2).with_nu(1e-6)).unwrap();
    let fit = cluster(&ds, &model, 2, 2, &EmConfig::default()).unwrap();
    assert!((adjusted_rand_index(&fit.init_labels, &truth).unwrap() - 1.0).abs() < 1e-12);
    assert!((adjusted_rand_index(&fit.labels, &truth).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn em_log_likelihood_never_drops() {
    for seed in 0..4 {
        let (ds, _) = gen_clustering(80, 6, 10, 3, seed).unwrap();
        let model = fsvd(&ds, &FitConfig::default().with_rank(3).with_nu(1e-5)).unwrap();
        let fit = cluster(&ds, &model, 3, 3, &EmConfig { seed, ..EmConfig::default() }).unwrap();
        let scale = fit.loglik_trace.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        assert!(fit.max_loglik_decrease() <= 1e-8 * scale, "seed {seed}: {:?}", fit.loglik_trace);
    }
}

#[test]
fn model_json_round_trip_is_bit_exact() {
    let (ds, _) = gen_completion(30, 4, 8, true, 9).unwrap();
    let model = fsvd(&ds, &FitConfig::default().with_rank(2)).unwrap();
    let text = model_to_json(&model).unwrap();
    let back = model_from_json(&text).unwrap();
    assert_eq!(model_to_json(&back).unwrap(), text);
    for (x, y) in back.components.iter().zip(&model.components) {
        assert_eq!(x.rho.to_bits(), y.rho.to_bits());
        assert_eq!(x.a, y.a);
        for t in [0.0, 0.2718, 1.0] {
            assert_eq!(x.phi.evaluate(t).to_bits(), y.phi.evaluate(t).to_bits());
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads| {
        with_threads(Some(threads), || {
            let (ds, _) = gen_completion(40, 4, 8, false, 12).unwrap();
            model_to_json(&fsvd(&ds, &FitConfig::default().with_rank(3)).unwrap()).unwrap()
        })
    };
    let one = run(1);
    assert_eq!(one, run(2));
    assert_eq!(one, run(5));
}
