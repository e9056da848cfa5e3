//! Run configuration read from a TOML file.
//!
//! Every section is optional except the root `seed`. Missing keys take the
//! defaults below, and the fully resolved configuration is written next to
//! the outputs of each command.

use std::path::{Path, PathBuf};

use featrank::dataset::{CorrelationBlock, Interaction};
use featrank::models::{ForestConfig, LogRegConfig};
use featrank::rankings::Loss;
use featrank::selection::{DEFAULT_CUTOFF, DEFAULT_C_GRID};
use featrank::{Dataset, Metric, ModelConfig, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; required here or on the command line.
    pub seed: Option<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub rank: RankSection,
    #[serde(default)]
    pub complexity: ComplexitySection,
    #[serde(default)]
    pub select: SelectSection,
    #[serde(default)]
    pub faithfulness: FaithfulnessSection,
    #[serde(default)]
    pub curves: CurvesSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("featrank-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub csv: Option<PathBuf>,
    pub target: String,
    pub test_fraction: f64,
    pub synthetic: Option<SyntheticSection>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            csv: None,
            target: "target".into(),
            test_fraction: 0.25,
            synthetic: None,
        }
    }
}

/// Synthetic recipe. `n_features` may be left out and `seed` defaults to one
/// derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_samples: usize,
    pub signal_weights: Vec<f64>,
    #[serde(default)]
    pub noise_features: usize,
    pub n_features: Option<usize>,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub correlation_blocks: Vec<CorrelationBlock>,
    #[serde(default)]
    pub interaction_pairs: Vec<Interaction>,
    pub seed: Option<u64>,
}

impl SyntheticSection {
    pub fn to_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n_features: self
                .n_features
                .unwrap_or(self.signal_weights.len() + self.noise_features),
            n_samples: self.n_samples,
            signal_weights: self.signal_weights.clone(),
            correlation_blocks: self.correlation_blocks.clone(),
            interaction_pairs: self.interaction_pairs.clone(),
            noise_features: self.noise_features,
            intercept: self.intercept,
            seed: self.seed.unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSection {
    Logreg(LogRegConfig),
    Forest(ForestConfig),
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection::Logreg(LogRegConfig::default())
    }
}

impl ModelSection {
    pub fn to_model(&self) -> ModelConfig {
        match self {
            ModelSection::Logreg(c) => ModelConfig::Logreg(c.clone()),
            ModelSection::Forest(c) => ModelConfig::Forest(c.clone()),
        }
    }

    fn set_seed(&mut self, seed: u64) {
        match self {
            ModelSection::Logreg(c) => c.seed = seed,
            ModelSection::Forest(c) => c.seed = seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSet {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankSection {
    /// Empty means every method available for the model kind.
    pub methods: Vec<String>,
    pub metric: Metric,
    pub n_permute: usize,
    pub n_permute_multipass: usize,
    pub shap_samples: usize,
    pub sage_samples: usize,
    pub sage_loss: Loss,
    pub lime_perturb: usize,
    pub n_background: usize,
    pub max_instances: usize,
    pub n_bins: usize,
    /// Features entering the rank-uncertainty statistic; 0 means all.
    pub top_k: usize,
    /// Three methods compared against all triples; empty skips the ratio.
    pub ratio_methods: Vec<String>,
    pub evaluate_on: EvalSet,
}

impl Default for RankSection {
    fn default() -> Self {
        RankSection {
            methods: vec![],
            metric: Metric::Naupdc,
            n_permute: 30,
            n_permute_multipass: 10,
            shap_samples: 100,
            sage_samples: 512,
            sage_loss: Loss::CrossEntropy,
            lime_perturb: 1000,
            n_background: 100,
            max_instances: 100,
            n_bins: 30,
            top_k: 0,
            ratio_methods: vec![],
            evaluate_on: EvalSet::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexitySection {
    pub n_boot: usize,
    pub n_bins: usize,
    pub epsilon: f64,
}

impl Default for ComplexitySection {
    fn default() -> Self {
        ComplexitySection {
            n_boot: 100,
            n_bins: 30,
            epsilon: 0.05,
        }
    }
}

/// L1 strength: a number, or `"tune"` to pick one from `c_grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CChoice {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectSection {
    pub manual_drop: Vec<String>,
    /// Absent means no L1 screening.
    pub c: Option<CChoice>,
    pub c_grid: Vec<f64>,
    pub tolerance: f64,
    pub cutoff: f64,
    pub n_boot: usize,
    pub with_complexity: bool,
    /// Model for the reduced feature set; the main model when absent.
    pub reduced_model: Option<ModelSection>,
}

impl Default for SelectSection {
    fn default() -> Self {
        SelectSection {
            manual_drop: vec![],
            c: None,
            c_grid: DEFAULT_C_GRID.to_vec(),
            tolerance: 0.01,
            cutoff: DEFAULT_CUTOFF,
            n_boot: 1000,
            with_complexity: true,
            reduced_model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaithfulnessSection {
    pub n_subsets: usize,
    pub metric: Metric,
    pub degree: usize,
    pub n_boot: usize,
    pub max_failure_rate: f64,
}

impl Default for FaithfulnessSection {
    fn default() -> Self {
        FaithfulnessSection {
            n_subsets: 5000,
            metric: Metric::Naupdc,
            degree: 5,
            n_boot: 100,
            max_failure_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesSection {
    /// Size of the top and bottom sets; 0 means a fifth of the features.
    pub k: usize,
    /// Longest prefix in the incremental curves; 0 means all features.
    pub k_max: usize,
    pub n_boot: usize,
    pub metric: Metric,
}

impl Default for CurvesSection {
    fn default() -> Self {
        CurvesSection {
            k: 0,
            k_max: 0,
            n_boot: 1000,
            metric: Metric::Naupdc,
        }
    }
}

/// Seeds handed to each pipeline stage, all derived from the run seed.
/// They are cut to 63 bits because TOML integers are signed.
pub mod seeds {
    fn derive_seed(root: u64, index: u64) -> u64 {
        featrank::rng::derive_seed(root, index) & (i64::MAX as u64)
    }

    pub fn split(root: u64) -> u64 {
        derive_seed(root, 1)
    }
    pub fn model(root: u64) -> u64 {
        derive_seed(root, 2)
    }
    pub fn method(root: u64, index: usize) -> u64 {
        derive_seed(derive_seed(root, 3), index as u64)
    }
    pub fn experiment(root: u64) -> u64 {
        derive_seed(root, 4)
    }
    pub fn complexity(root: u64) -> u64 {
        derive_seed(root, 5)
    }
    pub fn select(root: u64) -> u64 {
        derive_seed(root, 6)
    }
    pub fn curves(root: u64) -> u64 {
        derive_seed(root, 7)
    }
    pub fn synthetic(root: u64) -> u64 {
        derive_seed(root, 8)
    }
}

impl RunConfig {
    /// Parse, apply the seed override and fill derived defaults.
    pub fn from_toml(text: &str, seed_override: Option<u64>) -> Result<Self, CliError> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if seed_override.is_some() {
            cfg.seed = seed_override;
        }
        let root = cfg
            .seed
            .ok_or_else(|| CliError::Config("missing `seed`: set it in the config or pass --seed".into()))?;
        let has_seed = |t: Option<&toml::Value>| t.and_then(|v| v.get("seed")).is_some();
        let model = raw.get("model");
        if !has_seed(model) {
            cfg.model.set_seed(seeds::model(root));
        }
        let select_reduced = raw.get("select").and_then(|s| s.get("reduced_model"));
        if let Some(m) = cfg.select.reduced_model.as_mut() {
            if !has_seed(select_reduced) {
                m.set_seed(seeds::model(root));
            }
        }
        if let Some(s) = cfg.data.synthetic.as_mut() {
            if s.seed.is_none() {
                s.seed = Some(seeds::synthetic(root));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text, seed_override)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // paths in the file are relative to the file
        if let Some(dir) = path.parent() {
            if let Some(csv) = cfg.data.csv.as_mut() {
                if csv.is_relative() {
                    *csv = dir.join(&*csv);
                }
            }
            if cfg.out.is_relative() {
                cfg.out = dir.join(&cfg.out);
            }
        }
        Ok(cfg)
    }

    pub fn root_seed(&self) -> u64 {
        self.seed.expect("seed is resolved at load time")
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let d = &self.data;
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return bad(format!("data.test_fraction = {} must lie in (0, 1)", d.test_fraction));
        }
        if let Some(s) = &d.synthetic {
            s.to_spec().validate().map_err(|e| CliError::Config(format!("data.synthetic: {e}")))?;
        }
        if let Some(CChoice::Named(n)) = &self.select.c {
            if n != "tune" {
                return bad(format!("select.c must be a number or \"tune\", got \"{n}\""));
            }
        }
        if let Some(CChoice::Value(c)) = &self.select.c {
            if !(*c > 0.0) {
                return bad(format!("select.c = {c} must be positive"));
            }
        }
        for (name, v) in [
            ("rank.n_permute", self.rank.n_permute),
            ("rank.n_permute_multipass", self.rank.n_permute_multipass),
            ("rank.shap_samples", self.rank.shap_samples),
            ("rank.sage_samples", self.rank.sage_samples),
            ("rank.lime_perturb", self.rank.lime_perturb),
            ("rank.n_background", self.rank.n_background),
            ("rank.max_instances", self.rank.max_instances),
            ("rank.n_bins", self.rank.n_bins),
            ("complexity.n_boot", self.complexity.n_boot),
            ("complexity.n_bins", self.complexity.n_bins),
            ("select.n_boot", self.select.n_boot),
            ("faithfulness.n_subsets", self.faithfulness.n_subsets),
            ("faithfulness.n_boot", self.faithfulness.n_boot),
            ("curves.n_boot", self.curves.n_boot),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !self.rank.ratio_methods.is_empty() && self.rank.ratio_methods.len() != 3 {
            return bad("rank.ratio_methods must name exactly three methods".into());
        }
        crate::methods::check_names(&self.rank.methods, &self.model)?;
        crate::methods::check_names(&self.rank.ratio_methods, &self.model)?;
        for m in &self.rank.ratio_methods {
            if !self.rank.methods.is_empty() && !self.rank.methods.contains(m) {
                return bad(format!("ratio method `{m}` is not in rank.methods"));
            }
        }
        Ok(())
    }

    /// Dataset named by the `[data]` section.
    pub fn dataset(&self) -> Result<Dataset, CliError> {
        match (&self.data.csv, &self.data.synthetic) {
            (Some(path), None) => Ok(Dataset::load_csv(path, &self.data.target)?),
            (None, Some(s)) => Ok(s.to_spec().generate()?.dataset),
            (Some(_), Some(_)) => Err(CliError::Config("give either data.csv or data.synthetic, not both".into())),
            (None, None) => Err(CliError::Config("no data source: set data.csv or data.synthetic".into())),
        }
    }
}
