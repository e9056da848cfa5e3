//! Feature ranking, model complexity and faithfulness tools for
//! probabilistic binary classifiers.

pub mod dataset;
pub mod effects;
pub mod error;
pub mod faithfulness;
pub mod metrics;
pub mod models;
pub mod rankings;
pub mod rng;
pub mod selection;
pub mod stats;

pub use dataset::{CorrelationBlock, CorrelationSummary, Dataset, Interaction, SyntheticData, SyntheticSpec};
pub use error::{Error, Result};
pub use metrics::{FitStats, Metric};
pub use models::{Classifier, ModelConfig, Predictor};
pub use rankings::{AggregatedRanking, RankingScorecard};
