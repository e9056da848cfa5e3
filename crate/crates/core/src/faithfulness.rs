//! Subset-retraining benchmark for ranking faithfulness.
//!
//! A faithful ranking assigns large total importance to feature subsets whose
//! retrained models perform well. Random subsets are drawn, a model is trained
//! on each, and the association between per-method total importance and
//! retrained performance is summarized with [`FitStats`].

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{bootstrap_rows, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{self, FitStats, Metric};
use crate::models::{Classifier, ModelConfig};
use crate::rankings::RankingScorecard;
use crate::rng::{self, stream};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessConfig {
    pub n_subsets: usize,
    pub metric: Metric,
    pub test_fraction: f64,
    /// Degree of the polynomial relating importance to performance.
    pub degree: usize,
    pub n_boot: usize,
    /// Largest tolerated share of failed retrainings.
    pub max_failure_rate: f64,
    pub seed: u64,
}

impl Default for FaithfulnessConfig {
    fn default() -> Self {
        FaithfulnessConfig {
            n_subsets: 5000,
            metric: Metric::Naupdc,
            test_fraction: 0.25,
            degree: 5,
            n_boot: 100,
            max_failure_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessRecord {
    pub subset: Vec<String>,
    pub subset_size: usize,
    pub performance: f64,
    /// Sum of each method's full-model scores over the subset.
    pub total_importance: BTreeMap<String, f64>,
    /// `total_importance` min-max scaled across all records.
    pub scaled_importance: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub metric: Metric,
    pub n_subsets: usize,
    pub model: ModelConfig,
    pub seed: u64,
    pub methods: Vec<String>,
    pub fit_stats: BTreeMap<String, FitStats>,
    /// Methods whose totals never varied, so no statistics exist.
    pub degenerate_methods: Vec<String>,
    pub failures: usize,
    pub records: Vec<FaithfulnessRecord>,
}

impl FaithfulnessReport {
    /// Flat table: members joined by `|`, size, performance, then one scaled
    /// total per method.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("subset,subset_size,performance");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{},{}", r.subset.join("|"), r.subset_size, r.performance));
            for m in &self.methods {
                out.push_str(&format!(",{}", r.scaled_importance[m]));
            }
            out.push('\n');
        }
        out
    }

    pub fn performance(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.performance).collect()
    }

    pub fn scaled(&self, method: &str) -> Vec<f64> {
        self.records.iter().map(|r| r.scaled_importance[method]).collect()
    }
}

/// Min-max scale to [0, 1]; constant input maps to 0.5.
pub fn min_max_scale(x: &[f64]) -> Vec<f64> {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; x.len()];
    }
    x.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

fn check_cards(data: &Dataset, cards: &[RankingScorecard]) -> Result<()> {
    for c in cards {
        if c.feature_names != data.feature_names() {
            return Err(Error::MismatchedFeatures("dataset".into(), c.method.clone()));
        }
    }
    let mut names: Vec<&str> = cards.iter().map(|c| c.method.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("scorecards must have distinct method names".into()));
    }
    Ok(())
}

/// Random subset: size uniform in `1..=p-1`, members uniform, ascending.
fn draw_subset(p: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::rng(seed);
    let k = r.random_range(1..p);
    let mut members = index::sample(&mut r, p, k).into_vec();
    members.sort_unstable();
    members
}

/// Train on `train[cols]` and score on `eval[cols]`.
fn retrain_score(
    train: &Dataset,
    eval: &Dataset,
    cols: &[usize],
    model: &ModelConfig,
    metric: Metric,
) -> Result<f64> {
    let fitted = model.for_n_features(cols.len()).fit(&train.select_columns(cols))?;
    let pred = fitted.predict(eval.select_columns(cols).features())?;
    metric.evaluate(eval.target(), &pred)
}

pub fn run_experiment(
    data: &Dataset,
    model: &ModelConfig,
    cards: &[RankingScorecard],
    cfg: &FaithfulnessConfig,
) -> Result<FaithfulnessReport> {
    let p = data.n_features();
    if p < 3 {
        return Err(Error::InvalidArgument("the benchmark needs at least three features".into()));
    }
    if cfg.n_subsets == 0 {
        return Err(Error::InvalidArgument("n_subsets must be positive".into()));
    }
    check_cards(data, cards)?;
    let (train, test) = data.split(cfg.test_fraction, cfg.seed)?;
    let max_failures = (cfg.max_failure_rate * cfg.n_subsets as f64).floor() as usize;
    let root = rng::derive_seed(cfg.seed, stream::SUBSET);

    let jobs: Vec<(Vec<usize>, f64, usize)> = (0..cfg.n_subsets)
        .into_par_iter()
        .map(|s| {
            let mut failures = 0;
            loop {
                let job_seed = rng::derive_path(root, &[s as u64, failures as u64]);
                let cols = draw_subset(p, job_seed);
                let m = model.with_seed(rng::derive_seed(job_seed, stream::TREES));
                match retrain_score(&train, &test, &cols, &m, cfg.metric) {
                    Ok(v) if v.is_finite() => return Ok((cols, v, failures)),
                    Ok(_) => log::warn!("subset {s}: non-finite score"),
                    Err(e) => log::warn!("subset {s}: retraining failed: {e}"),
                }
                failures += 1;
                if failures > max_failures {
                    return Err(Error::TooManyFailures {
                        failures,
                        total: cfg.n_subsets,
                    });
                }
            }
        })
        .collect::<Result<_>>()?;
    let failures: usize = jobs.iter().map(|j| j.2).sum();
    if failures > max_failures {
        return Err(Error::TooManyFailures {
            failures,
            total: cfg.n_subsets,
        });
    }

    let methods: Vec<String> = cards.iter().map(|c| c.method.clone()).collect();
    let totals: Vec<Vec<f64>> = cards
        .iter()
        .map(|c| jobs.iter().map(|(cols, _, _)| cols.iter().map(|&j| c.scores[j]).sum()).collect())
        .collect();
    let scaled: Vec<Vec<f64>> = totals.iter().map(|t| min_max_scale(t)).collect();
    let perf: Vec<f64> = jobs.iter().map(|j| j.1).collect();

    let mut fit_stats = BTreeMap::new();
    let mut degenerate_methods = vec![];
    let fit_root = rng::derive_seed(cfg.seed, stream::FIT_STATS);
    for (m, name) in methods.iter().enumerate() {
        match metrics::association_stats(&scaled[m], &perf, cfg.degree, cfg.n_boot, rng::derive_seed(fit_root, m as u64)) {
            Ok(s) => {
                fit_stats.insert(name.clone(), s);
            }
            Err(Error::ZeroVariance(what)) => {
                log::warn!("method `{name}`: {what} has zero variance; no statistics computed");
                degenerate_methods.push(name.clone());
            }
            Err(e) => return Err(e),
        }
    }

    let names = data.feature_names();
    let records = jobs
        .iter()
        .enumerate()
        .map(|(s, (cols, v, _))| FaithfulnessRecord {
            subset: cols.iter().map(|&j| names[j].clone()).collect(),
            subset_size: cols.len(),
            performance: *v,
            total_importance: methods.iter().enumerate().map(|(m, n)| (n.clone(), totals[m][s])).collect(),
            scaled_importance: methods.iter().enumerate().map(|(m, n)| (n.clone(), scaled[m][s])).collect(),
        })
        .collect();

    Ok(FaithfulnessReport {
        metric: cfg.metric,
        n_subsets: cfg.n_subsets,
        model: model.clone(),
        seed: cfg.seed,
        methods,
        fit_stats,
        degenerate_methods,
        failures,
        records,
    })
}

/// Performance summary for one subset size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub subset_size: usize,
    pub count: usize,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

pub fn pareto_curve(report: &FaithfulnessReport) -> Vec<ParetoPoint> {
    let mut by_size: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &report.records {
        by_size.entry(r.subset_size).or_default().push(r.performance);
    }
    by_size
        .into_iter()
        .map(|(size, mut v)| {
            v.sort_by(f64::total_cmp);
            ParetoPoint {
                subset_size: size,
                count: v.len(),
                mean: stats::mean(&v),
                p10: stats::quantile_sorted(&v, 0.1),
                p90: stats::quantile_sorted(&v, 0.9),
            }
        })
        .collect()
}

/// Feature indices of the `k` best or worst ranks, ascending.
fn by_rank(card: &RankingScorecard, k: usize, best: bool) -> Vec<usize> {
    let p = card.ranks.len();
    let mut cols: Vec<usize> = (0..p)
        .filter(|&j| if best { card.ranks[j] <= k } else { card.ranks[j] > p - k })
        .collect();
    cols.sort_unstable();
    cols
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopBottom {
    pub method: String,
    pub k: usize,
    pub top: Vec<String>,
    pub bottom: Vec<String>,
    pub top_score: f64,
    pub bottom_score: f64,
    /// `top_score - bottom_score`.
    pub delta: f64,
    /// 95% bootstrap interval of the delta.
    pub ci: (f64, f64),
}

/// Retrain on the `k` best and `k` worst features of `card` and compare their
/// skill on the training data.
pub fn topk_bottomk(
    data: &Dataset,
    model: &ModelConfig,
    card: &RankingScorecard,
    k: usize,
    metric: Metric,
    n_boot: usize,
    seed: u64,
) -> Result<TopBottom> {
    let p = data.n_features();
    if k == 0 || k > p {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={p}")));
    }
    if n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be positive".into()));
    }
    check_cards(data, std::slice::from_ref(card))?;
    if 2 * k > p {
        log::warn!("k = {k} exceeds half of {p} features; top and bottom sets overlap");
    }
    let top = by_rank(card, k, true);
    let bottom = by_rank(card, k, false);
    let fit = |cols: &[usize]| -> Result<Vec<f64>> {
        let sub = data.select_columns(cols);
        model.for_n_features(cols.len()).fit(&sub)?.predict(sub.features())
    };
    let (pt, pb) = (fit(&top)?, fit(&bottom)?);
    let y = data.target();
    let top_score = metric.evaluate(y, &pt)?;
    let bottom_score = metric.evaluate(y, &pb)?;

    let root = rng::derive_seed(seed, stream::CI);
    let mut deltas: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let rows = bootstrap_rows(y, rng::derive_seed(root, b as u64))?;
            let yb: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
            let tb: Vec<f64> = rows.iter().map(|&i| pt[i]).collect();
            let bb: Vec<f64> = rows.iter().map(|&i| pb[i]).collect();
            Ok(metric.evaluate(&yb, &tb)? - metric.evaluate(&yb, &bb)?)
        })
        .collect::<Result<_>>()?;
    deltas.sort_by(f64::total_cmp);
    let names = data.feature_names();
    Ok(TopBottom {
        method: card.method.clone(),
        k,
        top: top.iter().map(|&j| names[j].clone()).collect(),
        bottom: bottom.iter().map(|&j| names[j].clone()).collect(),
        top_score,
        bottom_score,
        delta: top_score - bottom_score,
        ci: metrics::percentile_interval(&deltas, 0.95),
    })
}

/// Skill of models trained on the best (or worst) 1, 2, ..., `k_max` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalCurves {
    pub method: String,
    pub best: Vec<f64>,
    pub worst: Vec<f64>,
}

/// Prefix curves evaluated on the training data.
pub fn incremental_curves(
    data: &Dataset,
    model: &ModelConfig,
    card: &RankingScorecard,
    k_max: usize,
    metric: Metric,
) -> Result<IncrementalCurves> {
    let p = data.n_features();
    if k_max == 0 || k_max > p {
        return Err(Error::InvalidArgument(format!("k_max = {k_max} must lie in 1..={p}")));
    }
    check_cards(data, std::slice::from_ref(card))?;
    let run = |best: bool| -> Result<Vec<f64>> {
        (1..=k_max)
            .into_par_iter()
            .map(|k| retrain_score(data, data, &by_rank(card, k, best), model, metric))
            .collect()
    };
    Ok(IncrementalCurves {
        method: card.method.clone(),
        best: run(true)?,
        worst: run(false)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SyntheticSpec;
    use crate::models::LogRegConfig;
    use crate::rankings::ScoreKind;

    fn synthetic(seed: u64) -> Dataset {
        SyntheticSpec::pareto(5, 1, 2.0, 1500, seed).generate().unwrap().dataset
    }

    fn card(d: &Dataset, method: &str, scores: Vec<f64>) -> RankingScorecard {
        RankingScorecard::from_scores(method, d.feature_names().to_vec(), scores, ScoreKind::Importance)
    }

    fn logreg() -> ModelConfig {
        ModelConfig::Logreg(LogRegConfig {
            c: 1.0,
            ..Default::default()
        })
    }

    #[test]
    fn scaling_convention() {
        assert_eq!(min_max_scale(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(min_max_scale(&[1.0, 1.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn subsets_in_range() {
        for s in 0..200 {
            let m = draw_subset(6, s);
            assert!((1..=5).contains(&m.len()));
            assert!(m.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let d = synthetic(1);
        let cards = vec![
            card(&d, "oracle", vec![32.0, 16.0, 8.0, 4.0, 2.0, 0.0]),
            card(&d, "flat", vec![1.0; 6]),
        ];
        let cfg = FaithfulnessConfig {
            n_subsets: 40,
            n_boot: 10,
            seed: 3,
            ..Default::default()
        };
        let a = run_experiment(&d, &logreg(), &cards, &cfg).unwrap();
        let b = run_experiment(&d, &logreg(), &cards, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 40);
        assert_eq!(a.fit_stats["oracle"].n, 40);
        for r in &a.records {
            // flat scores make the total a function of subset size alone
            assert_eq!(r.total_importance["flat"], r.subset_size as f64);
        }
        let lo = a.scaled("oracle").iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = a.scaled("oracle").iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
        let csv = a.records_csv();
        assert!(csv.starts_with("subset,subset_size,performance,oracle,flat\n"));
        assert_eq!(csv.lines().count(), 41);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = synthetic(2);
        let small = d.select_columns(&[0, 1]);
        let cfg = FaithfulnessConfig::default();
        assert!(run_experiment(&small, &logreg(), &[], &cfg).is_err());
        let wrong = RankingScorecard::from_scores("w", vec!["a".into()], vec![1.0], ScoreKind::Importance);
        assert!(matches!(
            run_experiment(&d, &logreg(), &[wrong], &cfg),
            Err(Error::MismatchedFeatures(..))
        ));
    }

    #[test]
    fn full_k_gives_zero_delta() {
        let d = synthetic(3);
        let c = card(&d, "oracle", vec![32.0, 16.0, 8.0, 4.0, 2.0, 0.0]);
        let tb = topk_bottomk(&d, &logreg(), &c, 6, Metric::Naupdc, 50, 1).unwrap();
        assert_eq!(tb.delta, 0.0);
        assert_eq!(tb.ci, (0.0, 0.0));
        let tb = topk_bottomk(&d, &logreg(), &c, 2, Metric::Naupdc, 200, 1).unwrap();
        assert_eq!(tb.top, vec!["x0", "x1"]);
        assert_eq!(tb.bottom, vec!["x4", "x5"]);
        assert!(tb.delta > 0.0 && tb.ci.0 > 0.0);
        assert!(topk_bottomk(&d, &logreg(), &c, 7, Metric::Naupdc, 50, 1).is_err());
    }

    #[test]
    fn incremental_endpoints() {
        let d = synthetic(4);
        let c = card(&d, "oracle", vec![32.0, 16.0, 8.0, 4.0, 2.0, 0.0]);
        let curves = incremental_curves(&d, &logreg(), &c, 6, Metric::Auc).unwrap();
        assert_eq!(curves.best.len(), 6);
        assert_eq!(curves.best[5], curves.worst[5]);
        assert!(curves.best[0] >= curves.worst[0]);
    }
}
