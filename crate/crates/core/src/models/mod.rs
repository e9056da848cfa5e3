//! Trainable classifiers and model-specific importance scores.
//!
//! Two model families are provided: elastic-net logistic regression fit by
//! coordinate descent on standardized features, and an entropy-split random
//! forest. Both are wrapped in a serializable [`Predictor`].

mod forest;
mod logreg;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub use forest::{ClassWeight, Criterion, Forest, ForestConfig, Tree};
pub use logreg::{LogRegConfig, LogisticModel};

/// Anything that maps a feature matrix to one score per row.
///
/// Fitted [`Predictor`]s return probabilities; test doubles and analytic
/// models may return arbitrary reals.
pub trait Classifier: Sync {
    fn feature_names(&self) -> &[String];

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>>;

    fn n_features(&self) -> usize {
        self.feature_names().len()
    }
}

pub(crate) fn check_columns(expected: usize, x: &ArrayView2<'_, f64>) -> Result<()> {
    if x.ncols() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: x.ncols(),
        });
    }
    Ok(())
}

/// Row-wise closure adapter, handy for analytic models.
pub struct FnModel<F> {
    names: Vec<String>,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(names: Vec<String>, f: F) -> Self {
        Self { names, f }
    }
}

impl<F> Classifier for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn feature_names(&self) -> &[String] {
        &self.names
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_columns(self.names.len(), &x)?;
        let mut row = vec![0.0; x.ncols()];
        Ok(x.rows()
            .into_iter()
            .map(|r| {
                row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
                (self.f)(&row)
            })
            .collect())
    }
}

/// Hyperparameters for either model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Logreg(LogRegConfig),
    Forest(ForestConfig),
}

impl ModelConfig {
    pub fn fit(&self, train: &Dataset) -> Result<Predictor> {
        match self {
            ModelConfig::Logreg(cfg) => fit_logreg(train, cfg),
            ModelConfig::Forest(cfg) => fit_forest(train, cfg),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Logreg(_) => "logreg",
            ModelConfig::Forest(_) => "forest",
        }
    }

    /// Copy usable on `n_features` columns: a forest's `max_features` is
    /// capped at the column count.
    pub fn for_n_features(&self, n_features: usize) -> Self {
        let mut out = self.clone();
        if let ModelConfig::Forest(c) = &mut out {
            c.max_features = c.max_features.min(n_features.max(1));
        }
        out
    }

    /// Same hyperparameters with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelConfig::Logreg(c) => c.seed = seed,
            ModelConfig::Forest(c) => c.seed = seed,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Logreg(LogisticModel),
    Forest(Forest),
}

/// A fitted model bound to the feature names it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    feature_names: Vec<String>,
    model: FittedModel,
}

impl Predictor {
    pub fn kind(&self) -> &'static str {
        match self.model {
            FittedModel::Logreg(_) => "logreg",
            FittedModel::Forest(_) => "forest",
        }
    }

    pub fn model(&self) -> &FittedModel {
        &self.model
    }

    pub fn as_logreg(&self) -> Result<&LogisticModel> {
        match &self.model {
            FittedModel::Logreg(m) => Ok(m),
            FittedModel::Forest(_) => Err(Error::WrongModelKind {
                expected: "logreg",
                actual: "forest",
            }),
        }
    }

    pub fn as_forest(&self) -> Result<&Forest> {
        match &self.model {
            FittedModel::Forest(f) => Ok(f),
            FittedModel::Logreg(_) => Err(Error::WrongModelKind {
                expected: "forest",
                actual: "logreg",
            }),
        }
    }

    /// Standardized-space coefficients, intercept excluded.
    pub fn coefficients(&self) -> Result<Vec<f64>> {
        Ok(self.as_logreg()?.coefficients.clone())
    }

    /// Normalized mean impurity decrease per feature.
    pub fn gini_importance(&self) -> Result<Vec<f64>> {
        Ok(self.as_forest()?.impurity_importance(self.feature_names.len()))
    }

    /// Per-row split contributions and bias, with
    /// `bias + sum(contributions) == predict` for every row.
    pub fn tree_path_attribution(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<f64>)> {
        let forest = self.as_forest()?;
        check_columns(self.feature_names.len(), &x)?;
        Ok(forest.path_attribution(x))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Classifier for Predictor {
    fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        check_columns(self.feature_names.len(), &x)?;
        Ok(match &self.model {
            FittedModel::Logreg(m) => m.predict(x),
            FittedModel::Forest(f) => f.predict(x),
        })
    }
}

pub fn fit_logreg(train: &Dataset, cfg: &LogRegConfig) -> Result<Predictor> {
    let model = logreg::fit(train, cfg)?;
    Ok(Predictor {
        feature_names: train.feature_names().to_vec(),
        model: FittedModel::Logreg(model),
    })
}

pub fn fit_forest(train: &Dataset, cfg: &ForestConfig) -> Result<Predictor> {
    let forest = forest::fit(train, cfg)?;
    Ok(Predictor {
        feature_names: train.feature_names().to_vec(),
        model: FittedModel::Forest(forest),
    })
}
