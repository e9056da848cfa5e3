use featrank::effects;
use featrank::faithfulness::min_max_scale;
use featrank::metrics::{self, poly_fit};
use featrank::models::FnModel;
use featrank::rankings::{self, exact_shapley, ranks_from_scores, shapley_values, RankingScorecard, ScoreKind};
use featrank::{stats, Classifier, Dataset};
use ndarray::Array2;
use proptest::prelude::*;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

/// Labels with at least one of each class, plus matching probabilities.
fn labelled(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    n.prop_flat_map(|n| (prop::collection::vec(0u8..2, n), prop::collection::vec(0.0f64..1.0, n)))
        .prop_map(|(mut y, p)| {
            y[0] = 0;
            y[1] = 1;
            (y, p)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_form_a_permutation(scores in prop::collection::vec(-10.0f64..10.0, 1..30)) {
        let r = ranks_from_scores(&scores);
        let mut sorted = r.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (1..=scores.len()).collect::<Vec<_>>());
        for a in 0..scores.len() {
            for b in 0..scores.len() {
                if scores[a] > scores[b] {
                    prop_assert!(r[a] < r[b]);
                }
            }
        }
    }

    #[test]
    fn auc_invariances((y, p) in labelled(4..60)) {
        let auc = metrics::roc_auc(&y, &p).unwrap();
        let warped: Vec<f64> = p.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        prop_assert!((metrics::roc_auc(&y, &warped).unwrap() - auc).abs() < 1e-12);
        let flipped: Vec<f64> = p.iter().map(|v| -v).collect();
        prop_assert!((metrics::roc_auc(&y, &flipped).unwrap() - (1.0 - auc)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn skill_scores_bounded_above((y, p) in labelled(4..80)) {
        prop_assert!(metrics::naupdc(&y, &p).unwrap() <= 1.0 + 1e-12);
        prop_assert!(metrics::ncsi(&y, &p).unwrap() <= 1.0 + 1e-12);
        prop_assert!(metrics::brier_skill_score(&y, &p).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn scaling_maps_into_unit_interval(x in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let s = min_max_scale(&x);
        prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn poly_r2_grows_with_degree(
        pts in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 12..40),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        prop_assume!(stats::variance(&x) > 1e-3 && stats::variance(&y) > 1e-6);
        let mut prev = f64::NEG_INFINITY;
        for d in 1..=5 {
            let r2 = poly_fit(&x, &y, d).unwrap().r2;
            prop_assert!(r2 >= prev - 1e-9, "degree {}: {} < {}", d, r2, prev);
            prev = r2;
        }
    }

    #[test]
    fn kendall_bounds_and_symmetry(
        pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if let Some(t) = stats::kendall_tau_b(&x, &y) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t));
            prop_assert!((stats::kendall_tau_b(&y, &x).unwrap() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregation_ignores_card_order(
        scores in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 3..6),
        rot in 0usize..5,
    ) {
        let cards: Vec<RankingScorecard> = scores
            .iter()
            .enumerate()
            .map(|(m, s)| RankingScorecard::from_scores(format!("m{m}"), names(5), s.clone(), ScoreKind::Importance))
            .collect();
        let mut shuffled = cards.clone();
        shuffled.rotate_left(rot % cards.len());
        shuffled.reverse();
        prop_assert_eq!(rankings::aggregate(&cards).unwrap(), rankings::aggregate(&shuffled).unwrap());
    }

    #[test]
    fn shapley_axioms(
        w in prop::collection::vec(-2.0f64..2.0, 3),
        inter in -1.0f64..1.0,
        xs in prop::collection::vec(-1.0f64..1.0, 4),
        bg in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        // feature 3 is never used; features 0 and 1 enter symmetrically
        let (a, c) = (w[0], w[2]);
        let m = FnModel::new(names(4), move |v: &[f64]| a * (v[0] + v[1]) + c * v[2] + inter * v[0] * v[1]);
        let bg = Array2::from_shape_vec((4, 4), bg).unwrap();
        let mut x = ndarray::Array1::from(xs);
        x[1] = x[0];
        let mut bg_sym = bg.clone();
        for i in 0..4 {
            bg_sym[[i, 1]] = bg[[i, 0]];
        }
        let exact = exact_shapley(&m, x.view(), bg_sym.view()).unwrap();
        prop_assert!(exact[3].abs() < 1e-12);
        prop_assert!((exact[0] - exact[1]).abs() < 1e-12);
        let fx = m.predict(x.view().insert_axis(ndarray::Axis(0))).unwrap()[0];
        let fb = stats::mean(&m.predict(bg_sym.view()).unwrap());
        prop_assert!((exact.iter().sum::<f64>() - (fx - fb)).abs() < 1e-12);
        // sampled values are exactly efficient when every background row gets
        // the same number of antithetic pairs
        let est = shapley_values(&m, x.view(), bg.view(), 2 * 4 * 5, 1).unwrap();
        let fb = stats::mean(&m.predict(bg.view()).unwrap());
        prop_assert!((est.iter().sum::<f64>() - (fx - fb)).abs() < 1e-10);
        prop_assert!(est[3].abs() < 1e-12);
    }

    #[test]
    fn ale_is_centred(seed in 0u64..1000, bins in 5usize..40) {
        let mut r = featrank::rng::rng(seed);
        use rand::Rng as _;
        let x = Array2::from_shape_fn((300, 2), |_| r.random_range(-3.0..3.0));
        let y = (0..300).map(|i| (i % 3 == 0) as u8).collect();
        let d = Dataset::new(x, y, names(2)).unwrap();
        let m = FnModel::new(names(2), |v: &[f64]| (v[0]).sin() + v[0] * v[1]);
        for c in effects::compute_all_ale(&m, &d, bins).unwrap() {
            let j: usize = c.feature[1..].parse().unwrap();
            let at_data: Vec<f64> = d.column(j).iter().map(|&v| c.interpolate(v)).collect();
            prop_assert!(stats::mean(&at_data).abs() < 1e-10);
        }
    }
}
