use featrank::dataset::CorrelationBlock;
use featrank::faithfulness::{self, FaithfulnessConfig};
use featrank::models::{fit_forest, fit_logreg, ForestConfig, LogRegConfig};
use featrank::rankings::ScoreKind;
use featrank::selection;
use featrank::{stats, Classifier, Dataset, ModelConfig, RankingScorecard, SyntheticSpec};

fn pareto(n_signal: usize, n_noise: usize, n: usize, seed: u64) -> Dataset {
    SyntheticSpec::pareto(n_signal, n_noise, 2.0, n, seed).generate().unwrap().dataset
}

#[test]
fn subset_matches_correlation_sub_block() {
    let mut spec = SyntheticSpec::pareto(3, 3, 1.0, 2000, 1);
    spec.correlation_blocks = vec![CorrelationBlock {
        features: vec![0, 4],
        rho: 0.7,
    }];
    let d = spec.generate().unwrap().dataset;
    let full = d.correlation_summary().unwrap();
    let sub = d.subset(&["x4", "x0", "x2"]).unwrap();
    let part = sub.correlation_summary().unwrap();
    let idx = [4, 0, 2];
    for a in 0..3 {
        for b in 0..3 {
            assert!((part.matrix[a][b] - full.matrix[idx[a]][idx[b]]).abs() < 1e-12);
        }
        assert!((part.target_corr[a] - full.target_corr[idx[a]]).abs() < 1e-12);
    }
}

#[test]
fn synthetic_generator_honours_spec() {
    let mut spec = SyntheticSpec::pareto(2, 2, 1.0, 20_000, 2);
    spec.correlation_blocks = vec![CorrelationBlock {
        features: vec![1, 2, 3],
        rho: 0.5,
    }];
    let d = spec.generate().unwrap().dataset;
    // symmetric logits around zero give a base rate near one half
    assert!((d.base_rate() - 0.5).abs() < 0.02, "{}", d.base_rate());
    let c = d.correlation_summary().unwrap();
    for (a, b) in [(1, 2), (1, 3), (2, 3)] {
        assert!((c.matrix[a][b] - 0.5).abs() < 0.03, "{a},{b}: {}", c.matrix[a][b]);
    }
    assert!(c.matrix[0][1].abs() < 0.03);

    spec.intercept = -3.0;
    let rare = spec.generate().unwrap().dataset;
    assert!(rare.base_rate() < 0.15);
}

#[test]
fn bootstrap_covers_about_632_percent() {
    let d = pareto(2, 0, 5000, 3);
    let mut idx = d.bootstrap_indices(7).unwrap();
    assert_eq!(idx.len(), 5000);
    idx.sort_unstable();
    idx.dedup();
    let share = idx.len() as f64 / 5000.0;
    assert!((share - 0.632).abs() < 0.02, "{share}");
}

#[test]
fn split_preserves_class_balance() {
    let d = pareto(2, 1, 1001, 4);
    let (train, test) = d.split(0.25, 9).unwrap();
    assert_eq!(train.n_rows() + test.n_rows(), 1001);
    for part in [&train, &test] {
        assert!((part.base_rate() - d.base_rate()).abs() < 0.01);
    }
}

#[test]
fn lasso_norm_shrinks_with_c() {
    let d = pareto(4, 4, 3000, 5);
    let mut prev = f64::INFINITY;
    for &c in selection::DEFAULT_C_GRID.iter().rev() {
        let norm: f64 = selection::l1_coefficients(&d, c, 0).unwrap().iter().map(|b| b.abs()).sum();
        assert!(norm <= prev + 1e-9, "C = {c}: {norm} > {prev}");
        prev = norm;
    }
}

#[test]
fn logreg_beats_zero_model() {
    let d = pareto(3, 2, 2000, 6);
    let p = fit_logreg(&d, &LogRegConfig::default()).unwrap();
    let m = p.as_logreg().unwrap();
    assert!(m.converged);
    // largest true weight gets the largest coefficient
    let c = p.coefficients().unwrap();
    assert!(c[0] > c[1] && c[1] > c[2]);
}

fn log_loss(y: &[u8], p: &[f64]) -> f64 {
    y.iter()
        .zip(p)
        .map(|(&t, &q)| {
            let q = q.clamp(1e-12, 1.0 - 1e-12);
            if t == 1 { -q.ln() } else { -(1.0 - q).ln() }
        })
        .sum::<f64>()
        / y.len() as f64
}

#[test]
fn forest_fits_and_attributes_additively() {
    let d = pareto(3, 2, 1500, 7);
    let cfg = ForestConfig {
        n_trees: 40,
        max_depth: 6,
        max_features: 3,
        seed: 1,
        ..Default::default()
    };
    let p = fit_forest(&d, &cfg).unwrap();
    let pred = p.predict(d.features()).unwrap();
    let b = d.base_rate();
    assert!(log_loss(d.target(), &pred) < log_loss(d.target(), &vec![b; d.n_rows()]));
    let (contrib, bias) = p.tree_path_attribution(d.features()).unwrap();
    for i in 0..d.n_rows() {
        let total = bias[i] + contrib.row(i).sum();
        assert!((total - pred[i]).abs() < 1e-9);
    }
    let g = p.gini_importance().unwrap();
    assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(p, featrank::Predictor::from_json(&p.to_json().unwrap()).unwrap());
}

#[test]
fn faithfulness_totals_track_membership() {
    let d = pareto(3, 3, 1200, 8);
    let scores = vec![5.0, 3.0, 2.0, 0.5, 0.25, 0.0];
    let card = RankingScorecard::from_scores("w", d.feature_names().to_vec(), scores.clone(), ScoreKind::Importance);
    let cfg = FaithfulnessConfig {
        n_subsets: 60,
        n_boot: 10,
        seed: 2,
        ..Default::default()
    };
    let model = ModelConfig::Logreg(LogRegConfig::default());
    let rep = faithfulness::run_experiment(&d, &model, &[card], &cfg).unwrap();
    for r in &rep.records {
        let want: f64 = r.subset.iter().map(|n| scores[d.feature_index(n).unwrap()]).sum();
        assert_eq!(r.total_importance["w"], want);
        assert!((1..d.n_features()).contains(&r.subset_size));
    }
    let pareto = faithfulness::pareto_curve(&rep);
    assert_eq!(pareto.iter().map(|q| q.count).sum::<usize>(), 60);
    for q in &pareto {
        assert!(q.p10 <= q.mean + 1e-12 && q.mean <= q.p90 + 1e-12);
    }
}

#[test]
fn no_signal_gives_no_association() {
    let d = pareto(0, 8, 1500, 9);
    let mut r = featrank::rng::rng(4);
    use rand::Rng as _;
    let card = RankingScorecard::from_scores(
        "random",
        d.feature_names().to_vec(),
        (0..8).map(|_| r.random::<f64>()).collect(),
        ScoreKind::Importance,
    );
    let cfg = FaithfulnessConfig {
        n_subsets: 300,
        n_boot: 10,
        metric: featrank::Metric::Auc,
        seed: 5,
        ..Default::default()
    };
    let model = ModelConfig::Logreg(LogRegConfig::default());
    let rep = faithfulness::run_experiment(&d, &model, &[card], &cfg).unwrap();
    let tau = rep.fit_stats["random"].kendall_tau;
    assert!(tau.abs() < 0.15, "{tau}");
    let perf = rep.performance();
    assert!((stats::mean(&perf) - 0.5).abs() < 0.05);
}

#[test]
fn csv_round_trip_through_disk() {
    let d = pareto(2, 1, 50, 10);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    d.write_csv(std::fs::File::create(&path).unwrap(), "label").unwrap();
    let back = Dataset::load_csv(&path, "label").unwrap();
    assert_eq!(back.feature_names(), d.feature_names());
    assert_eq!(back.target(), d.target());
    assert_eq!(back.features(), d.features());
    assert!(Dataset::load_csv(&path, "missing").is_err());
    assert!(Dataset::load_csv(dir.path().join("nope.csv"), "label").is_err());
}
