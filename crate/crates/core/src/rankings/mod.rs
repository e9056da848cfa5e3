//! Feature rankings from nine attribution methods and the statistics that
//! summarize how much those methods disagree.

mod lime;
mod permutation;
mod shapley;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::effects;
use crate::error::{Error, Result};
use crate::models::Predictor;
use crate::stats;

pub use lime::{lime_relevance, lime_surrogate, LimeConfig};
pub use permutation::{permutation_importance, Direction, Mode, PermutationConfig};
pub use shapley::{
    exact_sage, exact_shapley, sage_importance, shapley_relevance, shapley_values, Loss, SageConfig,
    ShapleyConfig,
};

/// Whether a score measures effect on skill or contribution to the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Importance,
    Relevance,
}

/// Per-feature scores from one method and the ranks derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingScorecard {
    pub method: String,
    pub feature_names: Vec<String>,
    /// Higher is more important.
    pub scores: Vec<f64>,
    /// 1 is most important.
    pub ranks: Vec<usize>,
    pub kind: ScoreKind,
    pub n_repeats: usize,
    pub seed: u64,
    /// Raw marginal gain at selection time, for multi-pass methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_gain: Option<Vec<f64>>,
}

impl RankingScorecard {
    /// Ranks by descending score, ties going to the lower feature index.
    pub fn from_scores(
        method: impl Into<String>,
        feature_names: Vec<String>,
        scores: Vec<f64>,
        kind: ScoreKind,
    ) -> Self {
        let ranks = ranks_from_scores(&scores);
        RankingScorecard {
            method: method.into(),
            feature_names,
            scores,
            ranks,
            kind,
            n_repeats: 1,
            seed: 0,
            selection_gain: None,
        }
    }

    pub(crate) fn with_meta(mut self, n_repeats: usize, seed: u64) -> Self {
        self.n_repeats = n_repeats;
        self.seed = seed;
        self
    }

    /// Feature names from most to least important.
    pub fn ordered_features(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.ranks.len()).collect();
        idx.sort_by_key(|&j| self.ranks[j]);
        idx.into_iter().map(|j| self.feature_names[j].as_str()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,score,rank\n");
        for j in 0..self.scores.len() {
            out.push_str(&format!("{},{},{}\n", self.feature_names[j], self.scores[j], self.ranks[j]));
        }
        out
    }
}

pub fn ranks_from_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; scores.len()];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = r + 1;
    }
    ranks
}

/// Absolute standardized logistic-regression coefficients.
pub fn coefficient_ranking(p: &Predictor) -> Result<RankingScorecard> {
    let scores = p.coefficients()?.iter().map(|c| c.abs()).collect();
    Ok(RankingScorecard::from_scores(
        "coefficients",
        p_names(p),
        scores,
        ScoreKind::Relevance,
    ))
}

/// Mean impurity decrease of a random forest.
pub fn gini_ranking(p: &Predictor) -> Result<RankingScorecard> {
    Ok(RankingScorecard::from_scores(
        "gini",
        p_names(p),
        p.gini_importance()?,
        ScoreKind::Relevance,
    ))
}

/// Mean absolute tree-path contribution over the rows of `data`.
pub fn tree_path_ranking(p: &Predictor, data: &Dataset) -> Result<RankingScorecard> {
    let (contrib, _) = p.tree_path_attribution(data.features())?;
    let scores = contrib
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / c.len() as f64)
        .collect();
    Ok(RankingScorecard::from_scores(
        "tree_interpreter",
        p_names(p),
        scores,
        ScoreKind::Relevance,
    ))
}

/// Variance of the first-order ALE of each feature.
pub fn ale_variance_ranking(p: &Predictor, data: &Dataset, n_bins: usize) -> Result<RankingScorecard> {
    use crate::models::Classifier;
    let scores = effects::ale_variance_scores(p, data, n_bins)?;
    Ok(RankingScorecard::from_scores(
        "ale_variance",
        p.feature_names().to_vec(),
        scores,
        ScoreKind::Relevance,
    ))
}

fn p_names(p: &Predictor) -> Vec<String> {
    use crate::models::Classifier;
    p.feature_names().to_vec()
}

/// Rank distribution of each feature across methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedRanking {
    pub feature_names: Vec<String>,
    /// Methods in alphabetical order.
    pub methods: Vec<String>,
    /// `rank_sets[j][m]` is the rank of feature `j` under `methods[m]`.
    pub rank_sets: Vec<Vec<usize>>,
    pub median: Vec<f64>,
    /// 75th minus 25th percentile of the ranks.
    pub iqr: Vec<f64>,
}

impl AggregatedRanking {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,median,iqr\n");
        for j in 0..self.median.len() {
            out.push_str(&format!("{},{},{}\n", self.feature_names[j], self.median[j], self.iqr[j]));
        }
        out
    }

    /// Feature indices ordered by median rank, ties by index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.median.len()).collect();
        idx.sort_by(|&a, &b| self.median[a].total_cmp(&self.median[b]).then(a.cmp(&b)));
        idx
    }
}

pub fn aggregate(cards: &[RankingScorecard]) -> Result<AggregatedRanking> {
    if cards.len() < 2 {
        return Err(Error::InvalidArgument("aggregation needs at least two scorecards".into()));
    }
    let mut sorted: Vec<&RankingScorecard> = cards.iter().collect();
    sorted.sort_by(|a, b| a.method.cmp(&b.method));
    let names = &sorted[0].feature_names;
    for c in &sorted[1..] {
        if &c.feature_names != names {
            return Err(Error::MismatchedFeatures(sorted[0].method.clone(), c.method.clone()));
        }
    }
    let p = names.len();
    let rank_sets: Vec<Vec<usize>> = (0..p).map(|j| sorted.iter().map(|c| c.ranks[j]).collect()).collect();
    let (mut median, mut iqr) = (vec![0.0; p], vec![0.0; p]);
    for j in 0..p {
        let mut r: Vec<f64> = rank_sets[j].iter().map(|&v| v as f64).collect();
        r.sort_by(f64::total_cmp);
        median[j] = stats::quantile_sorted(&r, 0.5);
        iqr[j] = stats::quantile_sorted(&r, 0.75) - stats::quantile_sorted(&r, 0.25);
    }
    Ok(AggregatedRanking {
        feature_names: names.clone(),
        methods: sorted.iter().map(|c| c.method.clone()).collect(),
        rank_sets,
        median,
        iqr,
    })
}

/// `sum(IQR_j / median_j) / sum(median_j)` over the `top_k` features with the
/// lowest median rank.
pub fn rank_uncertainty(agg: &AggregatedRanking, top_k: usize) -> Result<f64> {
    if top_k == 0 || top_k > agg.median.len() {
        return Err(Error::InvalidArgument(format!(
            "top_k = {top_k} must lie in 1..={}",
            agg.median.len()
        )));
    }
    let top = &agg.order()[..top_k];
    let (mut num, mut den) = (0.0, 0.0);
    for &j in top {
        let m = agg.median[j];
        if !(m > 0.0) {
            return Err(Error::InvalidArgument(format!("median rank of `{}` is zero", agg.feature_names[j])));
        }
        num += agg.iqr[j] / m;
        den += m;
    }
    Ok(num / den)
}

/// Uncertainty among `chosen` methods relative to the mean over every
/// three-method combination of `cards`.
pub fn uncertainty_ratio<S: AsRef<str>>(
    cards: &[RankingScorecard],
    chosen: &[S],
    top_k: usize,
) -> Result<f64> {
    if cards.len() < 4 {
        return Err(Error::InvalidArgument("the ratio needs at least four methods".into()));
    }
    if chosen.len() != 3 {
        return Err(Error::InvalidArgument("exactly three methods must be chosen".into()));
    }
    let pick: Vec<RankingScorecard> = chosen
        .iter()
        .map(|name| {
            cards
                .iter()
                .find(|c| c.method == name.as_ref())
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("no scorecard for method `{}`", name.as_ref())))
        })
        .collect::<Result<_>>()?;
    let numerator = rank_uncertainty(&aggregate(&pick)?, top_k)?;
    let m = cards.len();
    let (mut total, mut count) = (0.0, 0usize);
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let trio = [cards[a].clone(), cards[b].clone(), cards[c].clone()];
                total += rank_uncertainty(&aggregate(&trio)?, top_k)?;
                count += 1;
            }
        }
    }
    let denominator = total / count as f64;
    if !(denominator > 0.0) {
        return Err(Error::DegenerateAgreement);
    }
    Ok(numerator / denominator)
}
