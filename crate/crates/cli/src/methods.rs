//! Ranking methods addressable by name from the configuration.

use featrank::rankings::{
    self, lime_relevance, permutation_importance, sage_importance, shapley_relevance, Direction, LimeConfig, Mode,
    PermutationConfig, SageConfig, ShapleyConfig,
};
use featrank::{Dataset, Predictor, RankingScorecard};
use rayon::prelude::*;

use crate::config::{seeds, ModelSection, RankSection};
use crate::error::CliError;

const AGNOSTIC: [&str; 8] = ["bsp", "bmp", "fsp", "fmp", "shap", "sage", "lime", "ale_variance"];
const LOGREG_ONLY: [&str; 1] = ["coefficients"];
const FOREST_ONLY: [&str; 2] = ["gini", "tree_interpreter"];

/// Every method usable with `model`, in canonical order.
pub fn available(model: &ModelSection) -> Vec<&'static str> {
    let extra: &[&str] = match model {
        ModelSection::Logreg(_) => &LOGREG_ONLY,
        ModelSection::Forest(_) => &FOREST_ONLY,
    };
    AGNOSTIC.iter().chain(extra).copied().collect()
}

pub fn check_names(names: &[String], model: &ModelSection) -> Result<(), CliError> {
    let valid = available(model);
    for (i, n) in names.iter().enumerate() {
        if !valid.contains(&n.as_str()) {
            return Err(CliError::UnknownMethod {
                name: n.clone(),
                valid: valid.iter().map(|s| s.to_string()).collect(),
            });
        }
        if names[..i].contains(n) {
            return Err(CliError::Config(format!("method `{n}` listed twice")));
        }
    }
    Ok(())
}

/// Requested methods, or all available ones when the list is empty.
pub fn resolve(section: &RankSection, model: &ModelSection) -> Vec<String> {
    if section.methods.is_empty() {
        available(model).iter().map(|s| s.to_string()).collect()
    } else {
        section.methods.clone()
    }
}

/// Scorecards for `methods`. Each method gets a seed tied to its position in
/// the canonical list, so adding or removing a method leaves the others
/// unchanged.
pub fn compute_cards(
    predictor: &Predictor,
    data: &Dataset,
    methods: &[String],
    model: &ModelSection,
    s: &RankSection,
    root: u64,
) -> Result<Vec<RankingScorecard>, CliError> {
    let canon = available(model);
    methods
        .par_iter()
        .map(|name| {
            let idx = canon.iter().position(|c| c == name).expect("method names are validated");
            let seed = seeds::method(root, idx);
            log::info!("computing `{name}`");
            let perm = |direction, mode| {
                let mut c = PermutationConfig::new(direction, mode);
                c.metric = s.metric;
                c.seed = seed;
                c.n_permute = match mode {
                    Mode::SinglePass => s.n_permute,
                    Mode::MultiPass => s.n_permute_multipass,
                };
                permutation_importance(predictor, data, &c)
            };
            let card = match name.as_str() {
                "bsp" => perm(Direction::Backward, Mode::SinglePass),
                "bmp" => perm(Direction::Backward, Mode::MultiPass),
                "fsp" => perm(Direction::Forward, Mode::SinglePass),
                "fmp" => perm(Direction::Forward, Mode::MultiPass),
                "shap" => shapley_relevance(
                    predictor,
                    data,
                    &ShapleyConfig {
                        n_samples: s.shap_samples,
                        n_background: s.n_background,
                        max_instances: s.max_instances,
                        seed,
                    },
                ),
                "sage" => sage_importance(
                    predictor,
                    data,
                    &SageConfig {
                        loss: s.sage_loss,
                        n_samples: s.sage_samples,
                        n_background: s.n_background,
                        max_instances: s.max_instances,
                        seed,
                    },
                ),
                "lime" => lime_relevance(
                    predictor,
                    data,
                    &LimeConfig {
                        n_perturb: s.lime_perturb,
                        max_instances: s.max_instances,
                        seed,
                        ..Default::default()
                    },
                ),
                "ale_variance" => rankings::ale_variance_ranking(predictor, data, s.n_bins),
                "coefficients" => rankings::coefficient_ranking(predictor),
                "gini" => rankings::gini_ranking(predictor),
                "tree_interpreter" => rankings::tree_path_ranking(predictor, data),
                _ => unreachable!("method names are validated"),
            };
            Ok(card?)
        })
        .collect()
}
