//! Acceptance suite: one check per criterion, printed as a pass/fail line.
//!
//! Run with `cargo test -p featrank-cli --test acceptance`. The process exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use featrank::effects::{self, compute_ale, mec, mec_feature, ComplexityConfig};
use featrank::faithfulness::{self, FaithfulnessConfig};
use featrank::metrics::{self, Metric};
use featrank::models::{ForestConfig, FnModel, LogRegConfig};
use featrank::rankings::{
    self, exact_shapley, permutation_importance, shapley_values, AggregatedRanking, Direction, Mode, PermutationConfig,
    ScoreKind,
};
use featrank::selection::{self, CompareConfig, DEFAULT_CUTOFF, DEFAULT_C_GRID};
use featrank::{rng, stats, Classifier, Dataset, Interaction, ModelConfig, RankingScorecard, SyntheticSpec};
use ndarray::{Array2, Axis};
use rand::Rng as _;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn uniform(n: usize, p: usize, lo: f64, hi: f64, seed: u64) -> Array2<f64> {
    let mut r = rng::rng(seed);
    Array2::from_shape_fn((n, p), |_| r.random_range(lo..hi))
}

/// Targets drawn from `sigmoid(logit)` so both classes are present.
fn with_targets(x: Array2<f64>, logit: impl Fn(&[f64]) -> f64, seed: u64) -> Dataset {
    let mut r = rng::rng(seed);
    let y = x
        .rows()
        .into_iter()
        .map(|row| (r.random::<f64>() < sigmoid(logit(row.as_slice().unwrap()))) as u8)
        .collect();
    let p = x.ncols();
    Dataset::new(x, y, names(p)).unwrap()
}

fn ias_additive() -> Outcome {
    let x = uniform(5000, 5, -2.0, 2.0, 1);
    let d = with_targets(x, |v| v[0], 2);
    let beta = [1.0, -2.0, 0.5, 3.0, -0.25];
    let m = FnModel::new(names(5), move |v: &[f64]| v.iter().zip(&beta).map(|(a, b)| a * b).sum());
    let ias = effects::ias(&m, &d, effects::DEFAULT_BINS).unwrap();
    outcome(ias <= 1e-6, format!("IAS = {ias:.3e} (limit 1e-6)"))
}

fn ias_interaction() -> Outcome {
    // sign-symmetric quadruples (±u1, ±u2): every x1 value is seen with both
    // signs of x2, so x2 is independent of x1 and exactly symmetric
    let mut r = rng::rng(3);
    let q = 25_000;
    let mut x = Array2::zeros((4 * q, 2));
    for k in 0..q {
        let (u1, u2): (f64, f64) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        for (s, (a, b)) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)].iter().enumerate() {
            x[[4 * k + s, 0]] = a * u1;
            x[[4 * k + s, 1]] = b * u2;
        }
    }
    let d = with_targets(x, |v| v[0] + v[1], 4);
    let m = FnModel::new(names(2), |v: &[f64]| v[0] * v[1]);
    let ias = effects::ias(&m, &d, effects::DEFAULT_BINS).unwrap();
    let slack = 1e-12;
    outcome(
        (0.9 - slack..=1.0 + slack).contains(&ias),
        format!("IAS = {ias:.12} on {} samples (target [0.9, 1.0])", 4 * q),
    )
}

fn mec_exactness() -> Outcome {
    let x = uniform(4000, 3, 0.0, 1.0, 5);
    let d = with_targets(x, |v| v[0] - 0.5, 6);
    let lin = FnModel::new(names(3), |v: &[f64]| 2.0 * v[0] - v[1] + 0.3 * v[2]);
    let curves = effects::compute_all_ale(&lin, &d, 30).unwrap();
    let m_lin = mec(&curves, effects::DEFAULT_EPSILON).unwrap();

    let hinge_at = 0.3;
    let hinge = FnModel::new(names(3), move |v: &[f64]| (v[0] - hinge_at).max(0.0));
    let curve = compute_ale(&hinge, &d, "x0", 30).unwrap();
    let seg = mec_feature(&curve, effects::DEFAULT_EPSILON);
    let hinge_bin = curve
        .bin_edges
        .windows(2)
        .position(|e| e[0] <= hinge_at && hinge_at <= e[1])
        .unwrap();
    let knot_bin = seg
        .knots
        .first()
        .and_then(|k| curve.bin_centers.iter().position(|c| c == k));
    let near = knot_bin.is_some_and(|b| b.abs_diff(hinge_bin) <= 1);
    outcome(
        m_lin == 1.0 && seg.segments == 2 && near,
        format!(
            "linear MEC = {m_lin}; hinge MEC = {} with knot in bin {:?} (hinge bin {hinge_bin})",
            seg.segments, knot_bin
        ),
    )
}

fn shapley_oracle() -> Outcome {
    let x = uniform(300, 4, -2.0, 2.0, 7);
    let d = with_targets(x, |v| v[0], 8);
    let m = FnModel::new(names(4), |v: &[f64]| sigmoid(v[0] - v[1] + 0.7 * v[0] * v[2] + 0.3 * v[3]));
    let bg = d.features().select(Axis(0), &(0..50).collect::<Vec<_>>());
    let mut worst: f64 = 0.0;
    for seed in [11, 12, 13] {
        for i in [100, 150, 200, 250, 299] {
            let row = d.features().row(i).to_owned();
            let exact = exact_shapley(&m, row.view(), bg.view()).unwrap();
            let est = shapley_values(&m, row.view(), bg.view(), 20_000, seed).unwrap();
            for j in 0..4 {
                worst = worst.max((exact[j] - est[j]).abs());
            }
        }
    }
    outcome(worst < 0.01, format!("max |sampled - exact| = {worst:.5} over 3 seeds x 5 rows (limit 0.01)"))
}

fn permutation_null_and_signal() -> Outcome {
    let spec = SyntheticSpec {
        n_features: 3,
        n_samples: 3000,
        signal_weights: vec![2.0, 1.0],
        correlation_blocks: vec![],
        interaction_pairs: vec![],
        noise_features: 1,
        intercept: 0.0,
        seed: 21,
    };
    let d = spec.generate().unwrap().dataset;
    let model = ModelConfig::Logreg(LogRegConfig::default()).fit(&d).unwrap();
    let cfg = PermutationConfig {
        seed: 5,
        ..PermutationConfig::new(Direction::Backward, Mode::SinglePass)
    };
    let card = permutation_importance(&model, &d, &cfg).unwrap();
    // oracle: 1000 independent shuffles of the null column
    let base = metrics::naupdc(d.target(), &model.predict(d.features()).unwrap()).unwrap();
    let drops: Vec<f64> = (0..1000)
        .map(|k| {
            let perm = rng::permutation(d.n_rows(), 10_000 + k);
            let mut x = d.features().to_owned();
            for (i, &src) in perm.iter().enumerate() {
                x[[i, 2]] = d.features()[[src, 2]];
            }
            base - metrics::naupdc(d.target(), &model.predict(x.view()).unwrap()).unwrap()
        })
        .collect();
    let sd = stats::sample_sd(&drops);
    let band = 3.0 * sd;
    let null_ok = card.scores[2].abs() <= band;

    let hits = (0..20)
        .filter(|&s| {
            let x = uniform(2000, 3, -2.0, 2.0, 100 + s);
            let d = with_targets(x, |v| 2.0 * v[0] + v[1], 200 + s);
            let m = FnModel::new(names(3), |v: &[f64]| sigmoid(2.0 * v[0] + v[1]));
            let cfg = PermutationConfig {
                seed: 300 + s,
                ..PermutationConfig::new(Direction::Backward, Mode::SinglePass)
            };
            permutation_importance(&m, &d, &cfg).unwrap().ranks == vec![1, 2, 3]
        })
        .count();
    outcome(
        null_ok && hits >= 19,
        format!(
            "null BSP = {:.2e} within ±3σ = ±{band:.2e}: {null_ok} (oracle mean {:.2e}, 3σ/√n = {:.2e}); \
             rank order recovered in {hits}/20 seeds",
            card.scores[2],
            stats::mean(&drops),
            band / (cfg.n_permute as f64).sqrt()
        ),
    )
}

struct Faith {
    detail: String,
    pass: bool,
    records: Vec<(usize, f64)>,
}

fn faithfulness_discrimination() -> Faith {
    let mut lines = vec![];
    let mut pass = true;
    let mut records = vec![];
    let model = ModelConfig::Logreg(LogRegConfig::default());
    for seed in 0..5u64 {
        let syn = SyntheticSpec::pareto(12, 0, 3.0, 2000, 40 + seed).generate().unwrap();
        let d = syn.dataset;
        let oracle = RankingScorecard::from_scores(
            "oracle",
            d.feature_names().to_vec(),
            syn.weights.iter().map(|w| w.abs()).collect(),
            ScoreKind::Importance,
        );
        let mut r = rng::rng(900 + seed);
        let random = RankingScorecard::from_scores(
            "random",
            d.feature_names().to_vec(),
            (0..12).map(|_| r.random::<f64>()).collect(),
            ScoreKind::Importance,
        );
        let cfg = FaithfulnessConfig {
            n_subsets: 2000,
            seed,
            ..Default::default()
        };
        let rep = faithfulness::run_experiment(&d, &model, &[oracle, random], &cfg).unwrap();
        let (o, n) = (&rep.fit_stats["oracle"], &rep.fit_stats["random"]);
        let (dr2, dtau) = (o.r2 - n.r2, o.kendall_tau - n.kendall_tau);
        pass &= dr2 >= 0.3 && dtau >= 0.2;
        lines.push(format!("seed {seed}: dR2 {dr2:.2}, dtau {dtau:.2}"));
        records.extend(rep.records.iter().map(|r| (r.subset_size, r.performance)));
    }
    Faith {
        detail: lines.join("; "),
        pass,
        records,
    }
}

fn pareto_shape(records: &[(usize, f64)]) -> Outcome {
    let mut by: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for &(k, v) in records {
        by.entry(k).or_default().push(v);
    }
    let means: Vec<f64> = by.values().map(|v| stats::mean(v)).collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let second: Vec<f64> = means.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let curv = stats::mean(&second);
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    outcome(
        monotone && curv < 0.0,
        format!("means by size [{}]; mean second difference {curv:.4}", shown.join(", ")),
    )
}

fn rank_uncertainty_cases() -> Outcome {
    let agg = AggregatedRanking {
        feature_names: names(3),
        methods: vec![],
        rank_sets: vec![],
        median: vec![1.0, 2.0, 3.0],
        iqr: vec![1.0, 0.0, 3.0],
    };
    let s = rankings::rank_uncertainty(&agg, 3).unwrap();
    let same = |m: &str| RankingScorecard::from_scores(m, names(4), vec![4.0, 3.0, 2.0, 1.0], ScoreKind::Importance);
    let agree = rankings::rank_uncertainty(&rankings::aggregate(&[same("a"), same("b"), same("c")]).unwrap(), 4).unwrap();
    outcome(s == 1.0 / 3.0 && agree == 0.0, format!("hand table {s}; all-agree {agree}"))
}

/// Independent evaluation of the ratio for three-method sets on rank vectors.
fn enumerate_ratio(ranks: &[Vec<usize>], chosen: [usize; 3], top_k: usize) -> f64 {
    let p = ranks[0].len();
    let sigma = |trio: [usize; 3]| {
        let mut med = vec![0.0; p];
        let mut iqr = vec![0.0; p];
        for j in 0..p {
            let mut r: Vec<f64> = trio.iter().map(|&m| ranks[m][j] as f64).collect();
            r.sort_by(f64::total_cmp);
            med[j] = r[1];
            // linear interpolation: q25 at position 0.5, q75 at 1.5
            iqr[j] = (r[1] + 0.5 * (r[2] - r[1])) - (r[0] + 0.5 * (r[1] - r[0]));
        }
        let mut idx: Vec<usize> = (0..p).collect();
        idx.sort_by(|&a, &b| med[a].total_cmp(&med[b]).then(a.cmp(&b)));
        let top = &idx[..top_k];
        top.iter().map(|&j| iqr[j] / med[j]).sum::<f64>() / top.iter().map(|&j| med[j]).sum::<f64>()
    };
    let mut all = vec![];
    for a in 0..ranks.len() {
        for b in a + 1..ranks.len() {
            for c in b + 1..ranks.len() {
                all.push(sigma([a, b, c]));
            }
        }
    }
    sigma(chosen) / (all.iter().sum::<f64>() / all.len() as f64)
}

fn uncertainty_ratio_enumeration() -> Outcome {
    let ranks = vec![vec![1, 2, 3, 4, 5], vec![1, 3, 2, 4, 5], vec![2, 1, 3, 4, 5], vec![5, 4, 1, 3, 2]];
    let cards: Vec<RankingScorecard> = ranks
        .iter()
        .enumerate()
        .map(|(m, r)| RankingScorecard::from_scores(
            format!("m{m}"),
            names(5),
            r.iter().map(|&v| -(v as f64)).collect(),
            ScoreKind::Importance,
        ))
        .collect();
    let got = rankings::uncertainty_ratio(&cards, &["m0", "m1", "m2"], 3).unwrap();
    let want = enumerate_ratio(&ranks, [0, 1, 2], 3);
    outcome(
        (got - want).abs() <= 1e-15 && got < 1.0,
        format!("library {got:.15}, enumeration {want:.15}"),
    )
}

fn reduction_pipeline() -> Outcome {
    let mut spec = SyntheticSpec::pareto(6, 20, 1.6, 5000, 61);
    spec.signal_weights = vec![1.6, 1.3, 1.0, 0.8, 0.6, 0.5];
    let d = spec.generate().unwrap().dataset;
    let tuned = selection::tune_l1_c(&d, &DEFAULT_C_GRID, DEFAULT_CUTOFF, 0.25, 0.01, 3).unwrap();
    let kept = selection::l1_select(&d, tuned.c, DEFAULT_CUTOFF, 3).unwrap();
    let is_signal = |n: &String| n[1..].parse::<usize>().unwrap() < 6;
    let signal_dropped = 6 - kept.iter().filter(|n| is_signal(n)).count();
    let noise_dropped = 20 - kept.iter().filter(|n| !is_signal(n)).count();
    let reduced = d.subset(&kept).unwrap();
    let lr = ModelConfig::Logreg(LogRegConfig::default());
    let cmp = selection::compare_models(
        &d,
        &reduced,
        &lr,
        &lr,
        &CompareConfig {
            n_boot: 1000,
            complexity: None,
            seed: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let (lo, hi) = cmp.naupdc_diff_ci;
    let ci_ok = lo <= 0.0 && 0.0 <= hi;

    // interaction between two features with no main effect: L1 screening
    // drops them, and the reduced forest loses the interaction
    let mut ispec = SyntheticSpec::pareto(6, 20, 1.6, 5000, 62);
    ispec.signal_weights = vec![1.6, 1.3, 1.0, 0.8, 0.6, 0.5];
    ispec.interaction_pairs = vec![Interaction {
        i: 6,
        j: 7,
        strength: 3.0,
    }];
    let di = ispec.generate().unwrap().dataset;
    let ti = selection::tune_l1_c(&di, &DEFAULT_C_GRID, DEFAULT_CUTOFF, 0.25, 0.01, 5).unwrap();
    let kept_i = selection::l1_select(&di, ti.c, DEFAULT_CUTOFF, 5).unwrap();
    let forest = ModelConfig::Forest(ForestConfig {
        n_trees: 50,
        max_depth: 10,
        max_features: 13,
        seed: 9,
        ..Default::default()
    });
    let ci = selection::compare_models(
        &di,
        &di.subset(&kept_i).unwrap(),
        &forest,
        &forest,
        &CompareConfig {
            n_boot: 200,
            complexity: Some(ComplexityConfig {
                n_boot: 10,
                seed: 6,
                ..Default::default()
            }),
            seed: 7,
            ..Default::default()
        },
    )
    .unwrap();
    let ias_full = ci.before_complexity.as_ref().unwrap().ias_mean;
    let ias_red = ci.after_complexity.as_ref().unwrap().ias_mean;
    outcome(
        noise_dropped >= 18 && signal_dropped <= 1 && ci_ok && ias_red < ias_full,
        format!(
            "C = {}: dropped {noise_dropped}/20 noise, {signal_dropped}/6 signal; NAUPDC diff CI [{lo:.4}, {hi:.4}]; \
             interaction variant C = {}, kept {} features, IAS {ias_full:.3} -> {ias_red:.3}",
            tuned.c,
            ti.c,
            kept_i.len()
        ),
    )
}

fn metric_units() -> Outcome {
    let y: Vec<u8> = (0..40).map(|i| (i % 4 == 0) as u8).collect();
    let perfect: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let base = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
    let clim = vec![base; y.len()];
    let mut ok = true;
    let mut parts = vec![];
    for m in Metric::ALL {
        let v = m.evaluate(&y, &perfect).unwrap();
        ok &= v == 1.0;
        parts.push(format!("{m}(perfect) = {v}"));
    }
    let bss = metrics::brier_skill_score(&y, &clim).unwrap();
    let na = metrics::naupdc(&y, &clim).unwrap();
    let nc = metrics::ncsi(&y, &clim).unwrap();
    let auc4 = metrics::roc_auc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap();
    ok &= bss.abs() < 1e-12 && na.abs() < 1e-9 && nc.abs() < 1e-12 && auc4 == 0.75;
    parts.push(format!("climatology: BSS {bss:.1e}, NAUPDC {na:.1e}, NCSI {nc:.1e}; 4-sample AUC {auc4}"));
    outcome(ok, parts.join(", "))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 2024\n\n[data.synthetic]\nn_samples = 800\nsignal_weights = [2.0, 1.0, 0.5, 0.25]\nnoise_features = 2\n\n\
         [rank]\nmethods = [\"bsp\", \"fsp\", \"shap\", \"coefficients\"]\nn_permute = 5\nshap_samples = 20\nmax_instances = 20\n\n\
         [faithfulness]\nn_subsets = 100\nn_boot = 20\n",
    )
    .unwrap();
    let run = |out: &str| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_featrank"))
            .args(["faithfulness", "--format", "json", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(dir.path().join(out).join("faithfulness.json")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    outcome(a == b && !a.is_empty(), format!("two runs, {} bytes each, identical: {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, budget: Duration, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let el = t.elapsed();
        let pass = o.pass && el <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {} ({:.2} s, budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64(),
            budget.as_secs()
        );
    };
    let s = Duration::from_secs;
    report(1, "IAS analytic zero", s(5), &mut ias_additive);
    report(2, "IAS interaction saturation", s(30), &mut ias_interaction);
    report(3, "MEC exactness", s(1), &mut mec_exactness);
    report(4, "Shapley oracle equivalence", s(60), &mut shapley_oracle);
    report(5, "Permutation null and signal", s(60), &mut permutation_null_and_signal);
    let mut faith = None;
    report(6, "Faithfulness discrimination", s(600), &mut || {
        let f = faithfulness_discrimination();
        let o = outcome(f.pass, f.detail.clone());
        faith = Some(f);
        o
    });
    let records = faith.map(|f| f.records).unwrap_or_default();
    report(7, "Pareto shape", s(1), &mut || pareto_shape(&records));
    report(8, "Rank-uncertainty arithmetic", s(1), &mut rank_uncertainty_cases);
    report(9, "Uncertainty-ratio enumeration", s(1), &mut uncertainty_ratio_enumeration);
    report(10, "Reduction pipeline", s(300), &mut reduction_pipeline);
    report(11, "Metric unit cases", s(1), &mut metric_units);
    report(12, "End-to-end determinism", s(120), &mut cli_determinism);
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
