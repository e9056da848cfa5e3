use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RankingScorecard, ScoreKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::rng::{self, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyConfig {
    /// Sampled feature orderings per explained row.
    pub n_samples: usize,
    pub n_background: usize,
    pub max_instances: usize,
    pub seed: u64,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        ShapleyConfig {
            n_samples: 100,
            n_background: 100,
            max_instances: 100,
            seed: 0,
        }
    }
}

/// Up to `k` distinct rows, in ascending order.
pub(crate) fn sample_rows(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rows = rng::permutation(n, seed);
    rows.truncate(k);
    rows.sort_unstable();
    rows
}

/// Orderings come in antithetic pairs: each even draw is followed by its
/// reverse.
fn orderings(p: usize, n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut r = rng::rng(seed);
    let mut out = Vec::with_capacity(n);
    let mut base: Vec<usize> = (0..p).collect();
    for k in 0..n {
        if k % 2 == 0 {
            base.shuffle(&mut r);
            out.push(base.clone());
        } else {
            out.push(base.iter().rev().cloned().collect());
        }
    }
    out
}

/// Interventional Shapley values of `x` with absent features drawn from
/// `background`. Ordering pair `k` uses background row `k mod B`.
pub fn shapley_values<M: Classifier + ?Sized>(
    model: &M,
    x: ArrayView1<'_, f64>,
    background: ArrayView2<'_, f64>,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let p = x.len();
    let nb = background.nrows();
    if nb == 0 {
        return Err(Error::InvalidArgument("background set is empty".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let perms = orderings(p, n_samples, seed);
    let mut chain = Array2::zeros((n_samples * (p + 1), p));
    for (k, perm) in perms.iter().enumerate() {
        let z = background.row((k / 2) % nb);
        let mut cur: Array1<f64> = z.to_owned();
        chain.row_mut(k * (p + 1)).assign(&cur);
        for (step, &j) in perm.iter().enumerate() {
            cur[j] = x[j];
            chain.row_mut(k * (p + 1) + step + 1).assign(&cur);
        }
    }
    let out = model.predict(chain.view())?;
    let mut phi = vec![0.0; p];
    for (k, perm) in perms.iter().enumerate() {
        let base = k * (p + 1);
        for (step, &j) in perm.iter().enumerate() {
            phi[j] += out[base + step + 1] - out[base + step];
        }
    }
    phi.iter_mut().for_each(|v| *v /= n_samples as f64);
    Ok(phi)
}

/// Exact interventional Shapley values by enumerating all coalitions.
/// Cost grows as `2^P`; intended for small `P`.
pub fn exact_shapley<M: Classifier + ?Sized>(
    model: &M,
    x: ArrayView1<'_, f64>,
    background: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    let p = x.len();
    let nb = background.nrows();
    let mut v = vec![0.0; 1 << p];
    for (mask, slot) in v.iter_mut().enumerate() {
        let mut rows = background.to_owned();
        for j in (0..p).filter(|j| mask >> j & 1 == 1) {
            rows.column_mut(j).fill(x[j]);
        }
        *slot = model.predict(rows.view())?.iter().sum::<f64>() / nb as f64;
    }
    Ok(shapley_from_game(p, &v))
}

fn shapley_from_game(p: usize, v: &[f64]) -> Vec<f64> {
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let mut phi = vec![0.0; p];
    for (j, out) in phi.iter_mut().enumerate() {
        for mask in 0..(1usize << p) {
            if mask >> j & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact(s) * fact(p - s - 1) / fact(p);
            *out += w * (v[mask | 1 << j] - v[mask]);
        }
    }
    phi
}

/// Mean absolute Shapley value over sampled rows of `data`.
pub fn shapley_relevance<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    cfg: &ShapleyConfig,
) -> Result<RankingScorecard> {
    if cfg.n_background == 0 {
        return Err(Error::InvalidArgument("background set is empty".into()));
    }
    let x = data.features();
    let bg_rows = sample_rows(data.n_rows(), cfg.n_background, rng::derive_seed(cfg.seed, stream::BACKGROUND));
    let background = x.select(Axis(0), &bg_rows);
    let inst = sample_rows(data.n_rows(), cfg.max_instances, rng::derive_seed(cfg.seed, stream::INSTANCES));
    let perm_root = rng::derive_seed(cfg.seed, stream::PERMUTE);
    let phis: Vec<Vec<f64>> = inst
        .par_iter()
        .map(|&i| shapley_values(model, x.row(i), background.view(), cfg.n_samples, rng::derive_seed(perm_root, i as u64)))
        .collect::<Result<_>>()?;
    let p = data.n_features();
    let scores = (0..p)
        .map(|j| phis.iter().map(|phi| phi[j].abs()).sum::<f64>() / phis.len() as f64)
        .collect();
    Ok(RankingScorecard::from_scores("shap", data.feature_names().to_vec(), scores, ScoreKind::Relevance)
        .with_meta(cfg.n_samples, cfg.seed))
}

/// Loss whose expected reduction SAGE attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    CrossEntropy,
    Mse,
}

impl Loss {
    pub fn eval(self, y: u8, p: f64) -> f64 {
        let t = y as f64;
        match self {
            Loss::CrossEntropy => {
                let q = p.clamp(1e-12, 1.0 - 1e-12);
                -(t * q.ln() + (1.0 - t) * (1.0 - q).ln())
            }
            Loss::Mse => (t - p).powi(2),
        }
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" => Ok(Loss::CrossEntropy),
            "mse" => Ok(Loss::Mse),
            _ => Err(Error::UnknownLoss(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SageConfig {
    pub loss: Loss,
    /// Total sampled orderings, spread over the explained rows.
    pub n_samples: usize,
    pub n_background: usize,
    pub max_instances: usize,
    pub seed: u64,
}

impl Default for SageConfig {
    fn default() -> Self {
        SageConfig {
            loss: Loss::CrossEntropy,
            n_samples: 512,
            n_background: 100,
            max_instances: 256,
            seed: 0,
        }
    }
}

/// Mean model output at `x` with the features outside `known` taken from
/// each background row in turn.
fn imputed_mean<M: Classifier + ?Sized>(
    model: &M,
    x: ArrayView1<'_, f64>,
    known: &[bool],
    background: ArrayView2<'_, f64>,
) -> Result<f64> {
    let mut rows = background.to_owned();
    for (j, _) in known.iter().enumerate().filter(|(_, k)| **k) {
        rows.column_mut(j).fill(x[j]);
    }
    let out = model.predict(rows.view())?;
    Ok(out.iter().sum::<f64>() / out.len() as f64)
}

/// SAGE values: each feature's share of the expected loss reduction.
/// Ordering pair `k` explains row `k mod n` of the sampled rows, so the scores
/// sum to the loss drop from the mean background prediction to the full model.
pub fn sage_importance<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    cfg: &SageConfig,
) -> Result<RankingScorecard> {
    if cfg.n_background == 0 {
        return Err(Error::InvalidArgument("background set is empty".into()));
    }
    if cfg.n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be positive".into()));
    }
    let x = data.features();
    let y = data.target();
    let p = data.n_features();
    let bg_rows = sample_rows(data.n_rows(), cfg.n_background, rng::derive_seed(cfg.seed, stream::BACKGROUND));
    let background = x.select(Axis(0), &bg_rows);
    let inst = sample_rows(data.n_rows(), cfg.max_instances, rng::derive_seed(cfg.seed, stream::INSTANCES));
    let perms = orderings(p, cfg.n_samples, rng::derive_seed(cfg.seed, stream::PERMUTE));

    let contrib: Vec<Vec<f64>> = perms
        .par_iter()
        .enumerate()
        .map(|(k, perm)| {
            let i = inst[(k / 2) % inst.len()];
            let row = x.row(i);
            let mut known = vec![false; p];
            let mut prev = cfg.loss.eval(y[i], imputed_mean(model, row, &known, background.view())?);
            let mut out = vec![0.0; p];
            for &j in perm {
                known[j] = true;
                let cur = cfg.loss.eval(y[i], imputed_mean(model, row, &known, background.view())?);
                out[j] = prev - cur;
                prev = cur;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let scores = (0..p)
        .map(|j| contrib.iter().map(|c| c[j]).sum::<f64>() / cfg.n_samples as f64)
        .collect();
    Ok(RankingScorecard::from_scores("sage", data.feature_names().to_vec(), scores, ScoreKind::Importance)
        .with_meta(cfg.n_samples, cfg.seed))
}

/// Exact SAGE values over the given rows by enumerating all coalitions.
pub fn exact_sage<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    rows: &[usize],
    background: ArrayView2<'_, f64>,
    loss: Loss,
) -> Result<Vec<f64>> {
    let p = data.n_features();
    let x = data.features();
    let mut v = vec![0.0; 1 << p];
    for (mask, slot) in v.iter_mut().enumerate() {
        let known: Vec<bool> = (0..p).map(|j| mask >> j & 1 == 1).collect();
        let mut total = 0.0;
        for &i in rows {
            total -= loss.eval(data.target()[i], imputed_mean(model, x.row(i), &known, background)?);
        }
        *slot = total / rows.len() as f64;
    }
    Ok(shapley_from_game(p, &v))
}
