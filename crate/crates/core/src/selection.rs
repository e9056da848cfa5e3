//! Dimensionality reduction: manual drops, L1 screening and a before/after
//! comparison of the full and reduced models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{bootstrap_rows, Dataset};
use crate::effects::{self, ComplexityConfig, ComplexityReport};
use crate::error::{Error, Result};
use crate::metrics::{self, Metric};
use crate::models::{fit_logreg, Classifier, LogRegConfig, ModelConfig};
use crate::rng::{self, stream};
use crate::stats;

pub const DEFAULT_C: f64 = 0.0075;
pub const DEFAULT_CUTOFF: f64 = 1e-5;
pub const DEFAULT_C_GRID: [f64; 8] = [0.001, 0.0025, 0.005, 0.0075, 0.01, 0.025, 0.05, 0.1];

/// Standardized L1 coefficients at strength `c`.
pub fn l1_coefficients(data: &Dataset, c: f64, seed: u64) -> Result<Vec<f64>> {
    let cfg = LogRegConfig {
        c,
        l1_ratio: 1.0,
        seed,
        ..Default::default()
    };
    fit_logreg(data, &cfg)?.coefficients()
}

/// Features whose standardized L1 coefficient exceeds `cutoff` in magnitude.
pub fn l1_select(data: &Dataset, c: f64, cutoff: f64, seed: u64) -> Result<Vec<String>> {
    let coef = l1_coefficients(data, c, seed)?;
    let kept: Vec<String> = data
        .feature_names()
        .iter()
        .zip(&coef)
        .filter(|(_, b)| b.abs() > cutoff)
        .map(|(n, _)| n.clone())
        .collect();
    if kept.is_empty() {
        return Err(Error::NoFeaturesRetained(c));
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateC {
    pub c: f64,
    pub validation_naupdc: f64,
    pub n_retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedC {
    pub c: f64,
    pub candidates: Vec<CandidateC>,
}

/// Smallest C on `grid` whose validation NAUPDC is within `tolerance` of
/// the best. Each L1 model is fit on a stratified training split and scored
/// on the held-out rows.
pub fn tune_l1_c(
    data: &Dataset,
    grid: &[f64],
    cutoff: f64,
    test_fraction: f64,
    tolerance: f64,
    seed: u64,
) -> Result<TunedC> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("C grid is empty".into()));
    }
    let (train, valid) = data.split(test_fraction, seed)?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let candidates: Vec<CandidateC> = sorted
        .par_iter()
        .map(|&c| {
            let cfg = LogRegConfig {
                c,
                l1_ratio: 1.0,
                seed,
                ..Default::default()
            };
            let model = fit_logreg(&train, &cfg)?;
            let n_retained = model.coefficients()?.iter().filter(|b| b.abs() > cutoff).count();
            let pred = model.predict(valid.features())?;
            Ok(CandidateC {
                c,
                validation_naupdc: metrics::naupdc(valid.target(), &pred)?,
                n_retained,
            })
        })
        .collect::<Result<_>>()?;
    let best = candidates
        .iter()
        .map(|c| c.validation_naupdc)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = candidates
        .iter()
        .find(|cand| cand.n_retained > 0 && cand.validation_naupdc >= best - tolerance)
        .map(|cand| cand.c)
        .ok_or(Error::NoFeaturesRetained(sorted[sorted.len() - 1]))?;
    Ok(TunedC { c, candidates })
}

/// Drop the named features, keeping the rest in order.
pub fn manual_filter<S: AsRef<str>>(data: &Dataset, drop: &[S]) -> Result<Dataset> {
    let unknown: Vec<String> = drop
        .iter()
        .map(|s| s.as_ref())
        .filter(|s| data.feature_index(s).is_none())
        .map(String::from)
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownFeatures(unknown));
    }
    let keep: Vec<&String> = data
        .feature_names()
        .iter()
        .filter(|n| !drop.iter().any(|d| d.as_ref() == n.as_str()))
        .collect();
    if keep.is_empty() {
        return Err(Error::InvalidArgument("every feature was dropped".into()));
    }
    data.subset(&keep)
}

/// For each pair correlated at `|rho| >= threshold`, the member less
/// correlated with the target. A starting point for a manual drop list.
pub fn correlation_drop_candidates(data: &Dataset, threshold: f64) -> Result<Vec<String>> {
    let summary = data.correlation_summary()?;
    let mut drop: Vec<String> = vec![];
    for (a, b, _) in summary.pairs_above(threshold) {
        let ia = data.feature_index(&a).expect("name from summary");
        let ib = data.feature_index(&b).expect("name from summary");
        let weaker = if summary.target_corr[ia].abs() >= summary.target_corr[ib].abs() { b } else { a };
        if !drop.contains(&weaker) {
            drop.push(weaker);
        }
    }
    Ok(drop)
}

/// Bootstrap means of the four verification scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub naupdc: f64,
    pub ncsi: f64,
    pub auc: f64,
    pub bss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub n_boot: usize,
    pub test_fraction: f64,
    pub complexity: Option<ComplexityConfig>,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            n_boot: 1000,
            test_fraction: 0.25,
            complexity: Some(ComplexityConfig::default()),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub before: MetricTable,
    pub after: MetricTable,
    /// 95% paired bootstrap interval of `after - before` NAUPDC.
    pub naupdc_diff_ci: (f64, f64),
    pub before_complexity: Option<ComplexityReport>,
    pub after_complexity: Option<ComplexityReport>,
}

/// Train both models on one shared split and compare them on the same
/// bootstrap resamples of the test rows.
pub fn compare_models(
    full: &Dataset,
    reduced: &Dataset,
    model_full: &ModelConfig,
    model_reduced: &ModelConfig,
    cfg: &CompareConfig,
) -> Result<Comparison> {
    if full.n_rows() != reduced.n_rows() || full.target() != reduced.target() {
        return Err(Error::InvalidArgument("full and reduced datasets have different rows".into()));
    }
    let missing: Vec<String> = reduced
        .feature_names()
        .iter()
        .filter(|n| full.feature_index(n).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::UnknownFeatures(missing));
    }
    if cfg.n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be positive".into()));
    }
    let (train_f, test_f) = full.split(cfg.test_fraction, cfg.seed)?;
    let (train_r, test_r) = reduced.split(cfg.test_fraction, cfg.seed)?;
    let mf = model_full.fit(&train_f)?;
    let mr = model_reduced.for_n_features(reduced.n_features()).fit(&train_r)?;
    let pf = mf.predict(test_f.features())?;
    let pr = mr.predict(test_r.features())?;
    let y = test_f.target();

    let root = rng::derive_seed(cfg.seed, stream::CI);
    let reps: Vec<[f64; 8]> = (0..cfg.n_boot)
        .into_par_iter()
        .map(|b| {
            let rows = bootstrap_rows(y, rng::derive_seed(root, b as u64))?;
            let yb: Vec<u8> = rows.iter().map(|&i| y[i]).collect();
            let fb: Vec<f64> = rows.iter().map(|&i| pf[i]).collect();
            let rb: Vec<f64> = rows.iter().map(|&i| pr[i]).collect();
            let mut out = [0.0; 8];
            for (k, m) in [Metric::Naupdc, Metric::Ncsi, Metric::Auc, Metric::Bss].iter().enumerate() {
                out[k] = m.evaluate(&yb, &fb)?;
                out[4 + k] = m.evaluate(&yb, &rb)?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| reps.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let table = |o: usize| MetricTable {
        naupdc: stats::mean(&col(o)),
        ncsi: stats::mean(&col(o + 1)),
        auc: stats::mean(&col(o + 2)),
        bss: stats::mean(&col(o + 3)),
    };
    let mut diff: Vec<f64> = reps.iter().map(|r| r[4] - r[0]).collect();
    diff.sort_by(f64::total_cmp);

    let (before_complexity, after_complexity) = match &cfg.complexity {
        Some(cc) => (
            Some(effects::complexity_report(&mf, &train_f, cc)?),
            Some(effects::complexity_report(&mr, &train_r, cc)?),
        ),
        None => (None, None),
    };
    Ok(Comparison {
        before: table(0),
        after: table(4),
        naupdc_diff_ci: metrics::percentile_interval(&diff, 0.95),
        before_complexity,
        after_complexity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub retained: Vec<String>,
    pub dropped_manual: Vec<String>,
    pub dropped_l1: Vec<String>,
    /// L1 strength, absent when no screening was applied.
    pub c: Option<f64>,
    pub cutoff: f64,
    pub comparison: Comparison,
}

/// Manual drops, then L1 screening at `c`, then the full/reduced comparison.
/// With `c = None` no L1 screening is applied.
pub fn run_selection<S: AsRef<str>>(
    data: &Dataset,
    manual_drop: &[S],
    c: Option<f64>,
    cutoff: f64,
    model_full: &ModelConfig,
    model_reduced: &ModelConfig,
    cfg: &CompareConfig,
) -> Result<SelectionReport> {
    let filtered = manual_filter(data, manual_drop)?;
    let retained = match c {
        Some(c) => l1_select(&filtered, c, cutoff, cfg.seed)?,
        None => filtered.feature_names().to_vec(),
    };
    let dropped_l1 = filtered
        .feature_names()
        .iter()
        .filter(|n| !retained.contains(n))
        .cloned()
        .collect();
    let reduced = data.subset(&retained)?;
    let comparison = compare_models(data, &reduced, model_full, model_reduced, cfg)?;
    Ok(SelectionReport {
        dropped_manual: data
            .feature_names()
            .iter()
            .filter(|n| manual_drop.iter().any(|d| d.as_ref() == n.as_str()))
            .cloned()
            .collect(),
        retained,
        dropped_l1,
        c,
        cutoff,
        comparison,
    })
}
