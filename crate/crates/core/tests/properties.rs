mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use layerfuse::ensemble::{
    argmax_predict, sffs_select, sum_rule, sum_scores, ClassifierId, ClassifierPool,
};
use layerfuse::eval::wilcoxon_signed_rank;
use layerfuse::matrix::FeatureMatrix;
use layerfuse::reducers::{
    chi2_scores, cooc_tensor, dct_global, gep_value, gmtp_values, lbp_histogram, pca_fit,
    select_layers, Dct, Dct2d, GEP_BINS,
};
use layerfuse::svm::ScoreMatrix;
use layerfuse::tensor_store::ActivationTensor;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn map_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (3usize..9, 3usize..9).prop_flat_map(|(h, w)| {
        (Just(h), Just(w), prop::collection::vec(-100.0f64..100.0, h * w))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dct_round_trip_and_parseval(x in prop::collection::vec(-10.0f64..10.0, 1..64)) {
        let plan = Dct::new(x.len());
        let c = plan.forward(&x);
        prop_assert!((norm2(&c) - norm2(&x)).abs() < 1e-6);
        let back = plan.inverse(&c);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-6);
        }
        prop_assert_eq!(dct_global(&x, x.len()).unwrap(), c);
    }

    #[test]
    fn dct2_round_trip_and_parseval((h, w, map) in map_strategy()) {
        let plan = Dct2d::new(h, w);
        let c = plan.forward(&map);
        prop_assert!((norm2(&c) - norm2(&map)).abs() < 1e-6 * norm2(&map).max(1.0));
        for (a, b) in plan.inverse(&c).iter().zip(&map) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn lbp_sums_to_one_and_ignores_offsets((h, w, map) in map_strategy(), offset in -50.0f64..50.0) {
        // integer grids keep differences exact under the offset
        let map: Vec<f64> = map.iter().map(|v| v.round()).collect();
        let hist = lbp_histogram(&map, h, w).unwrap();
        prop_assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = map.iter().map(|v| v + offset.round()).collect();
        prop_assert_eq!(lbp_histogram(&shifted, h, w).unwrap(), hist);
    }

    #[test]
    fn gep_is_bounded_and_affine_invariant(
        map in prop::collection::vec(-10.0f64..10.0, 1..200),
        a in prop::sample::select(vec![0.5f64, 2.0, 4.0, 0.25]),
        b in prop::sample::select(vec![-8.0f64, 0.0, 16.0]),
    ) {
        let e = gep_value(&map);
        prop_assert!((0.0..=(GEP_BINS as f64).ln() + 1e-12).contains(&e));
        // power-of-two scales and offsets keep the min-max arithmetic exact
        let mapped: Vec<f64> = map.iter().map(|v| a * v + b).collect();
        prop_assert!((gep_value(&mapped) - e).abs() < 1e-9);
    }

    #[test]
    fn gmtp_counts_elements_below_the_mean(
        (d, m, n) in (1usize..5, 1usize..5, 1usize..5),
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let values: Vec<f32> = common::random_vec(&mut rng, d * m * n).iter().map(|&v| v as f32).collect();
        let t = ActivationTensor::new(d, m, n, values.clone()).unwrap();
        let g = gmtp_values(&t);
        prop_assert!(g.iter().all(|v| (0.0..=1.0).contains(v)));
        let mean = values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64;
        let below = values.iter().filter(|&&v| (v as f64) < mean).count() as f64;
        prop_assert!((g.iter().sum::<f64>() * (m * n) as f64 - below).abs() < 1e-9);
    }

    #[test]
    fn chi2_is_nonnegative_and_permutation_invariant(
        column in prop::collection::vec(-5.0f64..5.0, 2..60),
        seed in any::<u64>(),
    ) {
        let labels: Vec<usize> = (0..column.len()).map(|i| (i * 7 + 3) % 3).collect();
        let s = chi2_scores(&column, &labels, 10);
        prop_assert!(s >= 0.0);
        let mut order: Vec<usize> = (0..column.len()).collect();
        order.shuffle(&mut common::rng(seed));
        let pc: Vec<f64> = order.iter().map(|&i| column[i]).collect();
        let pl: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        prop_assert!((chi2_scores(&pc, &pl, 10) - s).abs() < 1e-9 * s.max(1.0));
    }

    #[test]
    fn cooc_matches_nested_loops(
        (d, m, n) in (1usize..4, 1usize..6, 1usize..6),
        r in 1usize..3,
        eps in prop::sample::select(vec![0.0f64, 0.01, 0.5]),
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let values: Vec<f32> = common::random_vec(&mut rng, d * m * n).iter().map(|&v| v as f32).collect();
        let t = ActivationTensor::new(d, m, n, values.clone()).unwrap();
        let wide: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let oracle = common::cooc_oracle(&wide, d, m, n, r, eps);
        for (a, b) in cooc_tensor(&t, r, eps).iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn selected_layers_are_sorted_and_keep_the_tail(l in 1usize..400, stride in 1usize..20, tail in 0usize..8) {
        let s = select_layers(l, stride, tail);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&x| (1..=l).contains(&x)));
        for x in l.saturating_sub(tail) + 1..=l {
            prop_assert!(s.contains(&x));
        }
        prop_assert!(s.contains(&l.div_ceil(2)));
    }

    #[test]
    fn pca_variances_descend_and_more_components_fit_better(
        (n, d) in (3usize..15, 1usize..7),
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| common::random_vec(&mut rng, d)).collect();
        let m = FeatureMatrix::from_rows(rows.clone()).unwrap();
        let full = pca_fit(&m, d).unwrap();
        let ev = full.explained_variance();
        prop_assert!(ev.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        let mut last = f64::INFINITY;
        for k in 1..=full.kept() {
            let p = pca_fit(&m, k).unwrap();
            let err: f64 = rows.iter().map(|r| {
                let back = p.reconstruct(&p.project(r).unwrap());
                back.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            }).sum();
            prop_assert!(err <= last + 1e-9);
            last = err;
        }
    }

    #[test]
    fn fusion_rows_sum_to_one_and_argmax_ignores_the_count(seed in any::<u64>(), take in 1usize..6) {
        let (scores, _) = common::random_pool(seed, 5, 12, 4);
        let pool = ClassifierPool::from_entries(
            scores.iter().enumerate()
                .map(|(i, s)| (ClassifierId::new(format!("l{i}"), "M"), ScoreMatrix::from_rows(s.clone()).unwrap()))
                .collect(),
        ).unwrap();
        let subset: Vec<ClassifierId> = pool.ids().take(take).cloned().collect();
        let fused = sum_rule(&pool, &subset).unwrap();
        for row in fused.iter_rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let raw = sum_scores(&pool, &subset).unwrap();
        let raw_pred: Vec<usize> = raw.chunks(4).map(layerfuse::ensemble::argmax).collect();
        prop_assert_eq!(argmax_predict(&fused), raw_pred);
    }

    #[test]
    fn sffs_never_loses_to_the_best_single(seed in any::<u64>(), max_size in 1usize..7) {
        let (scores, labels) = common::random_pool(seed, 6, 30, 3);
        let pool = ClassifierPool::from_entries(
            scores.iter().enumerate()
                .map(|(i, s)| (ClassifierId::new(format!("l{i}"), "M"), ScoreMatrix::from_rows(s.clone()).unwrap()))
                .collect(),
        ).unwrap();
        let sel = sffs_select(&pool, &labels, max_size).unwrap();
        let best_single = (0..6).map(|i| common::subset_accuracy(&scores, &labels, &[i])).fold(0.0, f64::max);
        prop_assert!(sel.criterion() >= best_single);
        prop_assert!(sel.chosen.len() <= max_size);
        prop_assert!(sel.criterion_trace().windows(2).all(|w| w[1] >= w[0]));
        let again = sffs_select(&pool, &labels, max_size).unwrap();
        prop_assert_eq!(again, sel);
    }

    #[test]
    fn wilcoxon_bounds_and_symmetry(
        pairs in prop::collection::vec((0u8..10, 0u8..10), 1..40),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 10.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 10.0).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        let n = r.n_effective as f64;
        prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        prop_assert!(r.w <= n * (n + 1.0) / 4.0);
        let s = wilcoxon_signed_rank(&b, &a).unwrap();
        prop_assert_eq!(r.p_value, s.p_value);
    }
}
