//! Tabular binary-classification data: ingestion, splitting, resampling,
//! correlation screening and synthetic generation with planted importances.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::stats;

/// Immutable feature matrix with a binary target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    target: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, target: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let (n, p) = features.dim();
        if n != target.len() {
            return Err(Error::InvalidDataset(format!(
                "{n} feature rows but {} targets",
                target.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidDataset("at least two rows are required".into()));
        }
        if p != feature_names.len() {
            return Err(Error::ShapeMismatch {
                expected: feature_names.len(),
                actual: p,
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        for ((row, col), v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: feature_names[col].clone(),
                });
            }
        }
        if let Some((row, v)) = target.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidTarget {
                row,
                value: v.to_string(),
            });
        }
        let positives = target.iter().filter(|&&v| v == 1).count();
        if positives == 0 || positives == n {
            return Err(Error::SingleClass);
        }
        Ok(Self {
            features,
            target,
            feature_names,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Fraction of positive targets.
    pub fn base_rate(&self) -> f64 {
        self.target.iter().filter(|&&v| v == 1).count() as f64 / self.n_rows() as f64
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.column(j).to_vec()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Rows in the given order (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        let features = self.features.select(Axis(0), rows);
        let target = rows.iter().map(|&r| self.target[r]).collect();
        Dataset::new(features, target, self.feature_names.clone())
    }

    /// Column projection onto `names`, in the given order.
    pub fn subset<S: AsRef<str>>(&self, names: &[S]) -> Result<Dataset> {
        if names.is_empty() {
            return Err(Error::InvalidArgument("feature subset is empty".into()));
        }
        let mut seen = HashSet::new();
        let mut cols = Vec::with_capacity(names.len());
        let mut unknown = Vec::new();
        for name in names {
            let name = name.as_ref();
            if !seen.insert(name) {
                return Err(Error::DuplicateFeature(name.to_string()));
            }
            match self.feature_index(name) {
                Some(j) => cols.push(j),
                None => unknown.push(name.to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::UnknownFeatures(unknown));
        }
        Ok(self.select_columns(&cols))
    }

    /// Column projection by index. Indices must be valid and distinct.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(1), cols),
            target: self.target.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
        }
    }

    /// Stratified train/test split. Returns `(train, test)`.
    ///
    /// Each class is shuffled independently and `round(n_class * test_fraction)`
    /// of its rows go to the test split; rows keep their original order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "test fraction {test_fraction} is outside (0, 1)"
            )));
        }
        let mut rng = rng::rng(rng::derive_seed(seed, stream::SPLIT));
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [0u8, 1] {
            let mut rows: Vec<usize> = (0..self.n_rows())
                .filter(|&r| self.target[r] == class)
                .collect();
            let n_test = (rows.len() as f64 * test_fraction).round() as usize;
            if n_test == 0 || n_test == rows.len() {
                return Err(Error::InvalidSplit(format!(
                    "test fraction {test_fraction} leaves a split without class {class}"
                )));
            }
            rows.shuffle(&mut rng);
            test.extend_from_slice(&rows[..n_test]);
            train.extend_from_slice(&rows[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.select_rows(&train)?, self.select_rows(&test)?))
    }

    /// Row indices of a bootstrap resample containing both classes.
    pub fn bootstrap_indices(&self, seed: u64) -> Result<Vec<usize>> {
        bootstrap_rows(&self.target, seed)
    }

    /// Resample rows with replacement, redrawing until both classes appear.
    pub fn bootstrap(&self, seed: u64) -> Result<Dataset> {
        let rows = self.bootstrap_indices(seed)?;
        self.select_rows(&rows)
    }

    /// Pearson correlations among features and against the target.
    pub fn correlation_summary(&self) -> Result<CorrelationSummary> {
        let p = self.n_features();
        let cols: Vec<Vec<f64>> = (0..p).map(|j| self.column(j)).collect();
        for (j, c) in cols.iter().enumerate() {
            if stats::variance(c) <= 0.0 {
                return Err(Error::ConstantFeature(self.feature_names[j].clone()));
            }
        }
        let y: Vec<f64> = self.target.iter().map(|&v| v as f64).collect();
        let mut matrix = vec![vec![1.0; p]; p];
        let mut off_diag = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                let r = stats::pearson(&cols[i], &cols[j]).unwrap_or(0.0);
                matrix[i][j] = r;
                matrix[j][i] = r;
                off_diag.push(r.abs());
            }
        }
        let target_corr: Vec<f64> = cols
            .iter()
            .map(|c| stats::pearson(c, &y).unwrap_or(0.0))
            .collect();
        let avg_feature_corr = if off_diag.is_empty() {
            0.0
        } else {
            stats::mean(&off_diag)
        };
        let avg_target_corr = stats::mean(&target_corr.iter().map(|r| r.abs()).collect::<Vec<_>>());
        Ok(CorrelationSummary {
            feature_names: self.feature_names.clone(),
            matrix,
            target_corr,
            avg_feature_corr,
            avg_target_corr,
        })
    }

    /// Load a comma-separated file with a header row. `target_column` must hold
    /// only 0/1; every other column becomes a feature, in file order.
    pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, target_column)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, target_column: &str) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .delimiter(b',')
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Csv(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut seen = HashSet::new();
        for h in &header {
            if !seen.insert(h.as_str()) {
                return Err(Error::DuplicateColumn(h.clone()));
            }
        }
        let target_idx = header
            .iter()
            .position(|h| h == target_column)
            .ok_or_else(|| Error::MissingTarget(target_column.to_string()))?;
        let names: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target_idx)
            .map(|(_, h)| h.clone())
            .collect();

        let mut values = Vec::new();
        let mut target = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Csv(e.to_string()))?;
            if record.len() != header.len() {
                return Err(Error::Csv(format!(
                    "row {row} has {} fields, header has {}",
                    record.len(),
                    header.len()
                )));
            }
            for (i, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if i == target_idx {
                    target.push(match cell {
                        "0" | "0.0" => 0,
                        "1" | "1.0" => 1,
                        _ => {
                            return Err(Error::InvalidTarget {
                                row,
                                value: cell.to_string(),
                            })
                        }
                    });
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    row,
                    column: header[i].clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row,
                        column: header[i].clone(),
                    });
                }
                values.push(v);
            }
        }
        let n = target.len();
        let features = Array2::from_shape_vec((n, names.len()), values)
            .map_err(|e| Error::Csv(e.to_string()))?;
        Dataset::new(features, target, names)
    }

    /// Write as CSV with the target as the last column.
    pub fn write_csv<W: std::io::Write>(&self, writer: W, target_column: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        let mut header = self.feature_names.clone();
        header.push(target_column.to_string());
        wtr.write_record(&header).map_err(csv_err)?;
        for (row, y) in self.features.rows().into_iter().zip(&self.target) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            wtr.write_record(&rec).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

pub(crate) fn bootstrap_rows(target: &[u8], seed: u64) -> Result<Vec<usize>> {
    const MAX_ATTEMPTS: usize = 1000;
    let n = target.len();
    let mut rng = rng::rng(rng::derive_seed(seed, stream::BOOTSTRAP));
    for _ in 0..MAX_ATTEMPTS {
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let pos = rows.iter().filter(|&&r| target[r] == 1).count();
        if pos > 0 && pos < n {
            return Ok(rows);
        }
    }
    Err(Error::BootstrapExhausted(MAX_ATTEMPTS))
}

/// Correlation matrix plus the two dataset-level averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub feature_names: Vec<String>,
    /// Symmetric Pearson matrix with unit diagonal.
    pub matrix: Vec<Vec<f64>>,
    /// Pearson correlation of each feature with the target.
    pub target_corr: Vec<f64>,
    /// Mean absolute off-diagonal correlation.
    pub avg_feature_corr: f64,
    /// Mean absolute feature-target correlation.
    pub avg_target_corr: f64,
}

impl CorrelationSummary {
    /// Feature pairs with `|rho| >= threshold`, strongest first.
    pub fn pairs_above(&self, threshold: f64) -> Vec<(String, String, f64)> {
        let p = self.feature_names.len();
        let mut out = Vec::new();
        for i in 0..p {
            for j in i + 1..p {
                let r = self.matrix[i][j];
                if r.abs() >= threshold {
                    out.push((self.feature_names[i].clone(), self.feature_names[j].clone(), r));
                }
            }
        }
        out.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()));
        out
    }
}

/// Block of features with a common pairwise correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBlock {
    pub features: Vec<usize>,
    pub rho: f64,
}

/// Product term `strength * x_i * x_j` added to the log-odds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

/// Recipe for a synthetic dataset with known log-odds coefficients.
///
/// Features `0..signal_weights.len()` carry the given weights; the remaining
/// `noise_features` have weight zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_features: usize,
    pub n_samples: usize,
    pub signal_weights: Vec<f64>,
    #[serde(default)]
    pub correlation_blocks: Vec<CorrelationBlock>,
    #[serde(default)]
    pub interaction_pairs: Vec<Interaction>,
    #[serde(default)]
    pub noise_features: usize,
    /// Constant added to the log-odds; negative values give rare positives.
    #[serde(default)]
    pub intercept: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Weights `first, first/2, first/4, ...` for `n_signal` features,
    /// followed by `n_noise` zero-weight features.
    pub fn pareto(n_signal: usize, n_noise: usize, first: f64, n_samples: usize, seed: u64) -> Self {
        let signal_weights = (0..n_signal).map(|k| first / 2f64.powi(k as i32)).collect();
        Self {
            n_features: n_signal + n_noise,
            n_samples,
            signal_weights,
            correlation_blocks: Vec::new(),
            interaction_pairs: Vec::new(),
            noise_features: n_noise,
            intercept: 0.0,
            seed,
        }
    }

    /// Log-odds coefficient of every feature, noise included.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.signal_weights.clone();
        w.resize(self.n_features, 0.0);
        w
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_features == 0 || self.n_samples < 2 {
            return bad("n_features must be positive and n_samples at least 2".into());
        }
        if self.signal_weights.len() + self.noise_features != self.n_features {
            return bad(format!(
                "{} signal weights + {} noise features != {} features",
                self.signal_weights.len(),
                self.noise_features,
                self.n_features
            ));
        }
        let mut used = HashSet::new();
        for block in &self.correlation_blocks {
            if !(block.rho > -1.0 && block.rho < 1.0) {
                return bad(format!("block correlation {} is outside (-1, 1)", block.rho));
            }
            for &j in &block.features {
                if j >= self.n_features {
                    return bad(format!("block feature index {j} out of range"));
                }
                if !used.insert(j) {
                    return bad(format!("feature {j} appears in more than one block"));
                }
            }
        }
        for inter in &self.interaction_pairs {
            if inter.i >= self.n_features || inter.j >= self.n_features {
                return bad(format!("interaction ({}, {}) out of range", inter.i, inter.j));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Log-odds for one feature vector.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let linear: f64 = self.signal_weights.iter().zip(x).map(|(w, v)| w * v).sum();
        let inter: f64 = self
            .interaction_pairs
            .iter()
            .map(|t| t.strength * x[t.i] * x[t.j])
            .sum();
        self.intercept + linear + inter
    }

    /// Draw features from the multivariate normal and targets from
    /// `Bernoulli(sigmoid(logit))`.
    pub fn generate(&self) -> Result<SyntheticData> {
        self.validate()?;
        let p = self.n_features;
        let n = self.n_samples;

        // Lower Cholesky factor for each block.
        let mut factors = Vec::new();
        for block in &self.correlation_blocks {
            let k = block.features.len();
            let corr = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { block.rho });
            let chol = corr
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite(block.features.clone()))?;
            factors.push((block.features.clone(), chol.l()));
        }

        let mut rng = rng::rng(self.seed);
        let mut features = Array2::<f64>::zeros((n, p));
        let mut target = Vec::with_capacity(n);
        let mut z = vec![0.0; p];
        for mut row in features.rows_mut() {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let mut x = z.clone();
            for (idx, l) in &factors {
                for (a, &ja) in idx.iter().enumerate() {
                    x[ja] = (0..=a).map(|b| l[(a, b)] * z[idx[b]]).sum();
                }
            }
            let prob = sigmoid(self.logit(&x));
            let u: f64 = rng.random();
            target.push((u < prob) as u8);
            row.assign(&ndarray::ArrayView1::from(&x));
        }
        let names = (0..p).map(|j| format!("x{j}")).collect();
        let dataset = Dataset::new(features, target, names)?;
        Ok(SyntheticData {
            dataset,
            weights: self.weights(),
            spec: self.clone(),
        })
    }
}

/// Generated data together with the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// True log-odds coefficient per feature (noise features are zero).
    pub weights: Vec<f64>,
    pub spec: SyntheticSpec,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
