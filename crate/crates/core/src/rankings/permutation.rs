use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RankingScorecard, ScoreKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::models::Classifier;
use crate::rng::{self, stream};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Start intact and permute features.
    Backward,
    /// Start fully permuted and restore features.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SinglePass,
    MultiPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub metric: Metric,
    pub direction: Direction,
    pub mode: Mode,
    pub n_permute: usize,
    pub seed: u64,
}

impl PermutationConfig {
    pub fn new(direction: Direction, mode: Mode) -> Self {
        PermutationConfig {
            metric: Metric::Naupdc,
            direction,
            mode,
            n_permute: match mode {
                Mode::SinglePass => 30,
                Mode::MultiPass => 10,
            },
            seed: 0,
        }
    }

    pub fn method_name(&self) -> &'static str {
        match (self.direction, self.mode) {
            (Direction::Backward, Mode::SinglePass) => "bsp",
            (Direction::Backward, Mode::MultiPass) => "bmp",
            (Direction::Forward, Mode::SinglePass) => "fsp",
            (Direction::Forward, Mode::MultiPass) => "fmp",
        }
    }
}

/// Shared state for one run: the same shuffle of column `j` in repeat `r` is
/// reused by every evaluation, so the four variants see identical draws.
struct Ctx<'a, M: ?Sized> {
    model: &'a M,
    data: &'a Dataset,
    metric: Metric,
    perms: Vec<Vec<Vec<usize>>>,
}

impl<M: Classifier + ?Sized> Ctx<'_, M> {
    /// Metric in repeat `r` with the columns flagged in `shuffled` permuted.
    fn eval(&self, r: usize, shuffled: &[bool]) -> Result<f64> {
        let x = self.data.features();
        let mut work: Array2<f64> = x.to_owned();
        for (j, _) in shuffled.iter().enumerate().filter(|(_, s)| **s) {
            let perm = &self.perms[r][j];
            for (i, &src) in perm.iter().enumerate() {
                work[[i, j]] = x[[src, j]];
            }
        }
        let p = self.model.predict(work.view())?;
        self.metric.evaluate(self.data.target(), &p)
    }

    fn mean_eval(&self, shuffled: &[bool]) -> Result<f64> {
        let v: Vec<f64> = (0..self.perms.len())
            .into_par_iter()
            .map(|r| self.eval(r, shuffled))
            .collect::<Result<_>>()?;
        Ok(stats::mean(&v))
    }
}

/// Permutation importance in one of four variants.
///
/// Single-pass scores are the metric change from permuting (backward) or
/// restoring (forward) one column at a time. Multi-pass variants select
/// features greedily and keep earlier selections permuted or restored; ranks
/// follow selection order and scores are the selection gains made
/// non-increasing by a running minimum.
pub fn permutation_importance<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    cfg: &PermutationConfig,
) -> Result<RankingScorecard> {
    let p = data.n_features();
    if p == 0 {
        return Err(Error::InvalidArgument("dataset has no features".into()));
    }
    if cfg.n_permute == 0 {
        return Err(Error::InvalidArgument("n_permute must be positive".into()));
    }
    let n = data.n_rows();
    let root = rng::derive_seed(cfg.seed, stream::PERMUTE);
    let perms = (0..cfg.n_permute)
        .map(|r| {
            (0..p)
                .map(|j| rng::permutation(n, rng::derive_path(root, &[r as u64, j as u64])))
                .collect()
        })
        .collect();
    let ctx = Ctx {
        model,
        data,
        metric: cfg.metric,
        perms,
    };
    let names = data.feature_names().to_vec();
    let backward = cfg.direction == Direction::Backward;

    let card = match cfg.mode {
        Mode::SinglePass => {
            let base = if backward {
                ctx.mean_eval(&vec![false; p])?
            } else {
                ctx.mean_eval(&vec![true; p])?
            };
            let scores = (0..p)
                .into_par_iter()
                .map(|j| {
                    let mut mask = vec![!backward; p];
                    mask[j] = backward;
                    let v = ctx.mean_eval(&mask)?;
                    Ok(if backward { base - v } else { v - base })
                })
                .collect::<Result<Vec<f64>>>()?;
            RankingScorecard::from_scores(cfg.method_name(), names, scores, ScoreKind::Importance)
        }
        Mode::MultiPass => {
            let mut mask = vec![!backward; p];
            let mut level = ctx.mean_eval(&mask)?;
            let mut remaining: Vec<usize> = (0..p).collect();
            let (mut ranks, mut gains) = (vec![0; p], vec![0.0; p]);
            let mut order = Vec::with_capacity(p);
            while !remaining.is_empty() {
                let trial: Vec<f64> = remaining
                    .par_iter()
                    .map(|&j| {
                        let mut m = mask.clone();
                        m[j] = backward;
                        ctx.mean_eval(&m)
                    })
                    .collect::<Result<_>>()?;
                let gain = |v: f64| if backward { level - v } else { v - level };
                let mut best = 0;
                for k in 1..trial.len() {
                    if gain(trial[k]) > gain(trial[best]) {
                        best = k;
                    }
                }
                let j = remaining.remove(best);
                gains[j] = gain(trial[best]);
                level = trial[best];
                mask[j] = backward;
                order.push(j);
                ranks[j] = order.len();
            }
            let mut scores = vec![0.0; p];
            let mut floor = f64::INFINITY;
            for &j in &order {
                floor = floor.min(gains[j]);
                scores[j] = floor;
            }
            RankingScorecard {
                method: cfg.method_name().into(),
                feature_names: names,
                scores,
                ranks,
                kind: ScoreKind::Importance,
                n_repeats: cfg.n_permute,
                seed: cfg.seed,
                selection_gain: Some(gains),
            }
        }
    };
    Ok(card.with_meta(cfg.n_permute, cfg.seed))
}
