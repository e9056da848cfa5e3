//! Random forest of entropy-split classification trees.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    /// Weight each class by `n / (2 * n_class)`.
    Balanced,
    None,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_features: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub criterion: Criterion,
    pub class_weight: ClassWeight,
    /// Grow each tree on a bootstrap resample of the rows.
    #[serde(default = "default_true")]
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    /// The tuned road-surface configuration.
    fn default() -> Self {
        Self {
            n_trees: 500,
            max_depth: 20,
            max_features: 5,
            min_samples_leaf: 5,
            min_samples_split: 8,
            criterion: Criterion::Entropy,
            class_weight: ClassWeight::Balanced,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "n_trees, max_depth and min_samples_leaf must be positive".into(),
            ));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig("min_samples_split must be at least 2".into()));
        }
        if self.max_features == 0 || self.max_features > n_features {
            return Err(Error::InvalidConfig(format!(
                "max_features = {} but the data has {n_features} features",
                self.max_features
            )));
        }
        Ok(())
    }
}

/// One tree as parallel node arrays. `feature[k] == -1` marks a leaf; rows
/// with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<i32>,
    pub right: Vec<i32>,
    /// Weighted class-1 fraction of the training rows reaching the node.
    pub value: Vec<f64>,
    /// Entropy (bits) of the node.
    pub impurity: Vec<f64>,
    /// Total sample weight reaching the node.
    pub weight: Vec<f64>,
}

impl Tree {
    fn leaf_index(&self, row: &[f64]) -> usize {
        let mut k = 0usize;
        while self.feature[k] >= 0 {
            let f = self.feature[k] as usize;
            k = if row[f] <= self.threshold[k] {
                self.left[k] as usize
            } else {
                self.right[k] as usize
            };
        }
        k
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            if t.feature[k] < 0 {
                0
            } else {
                1 + go(t, t.left[k] as usize).max(go(t, t.right[k] as usize))
            }
        }
        go(self, 0)
    }

    fn push_node(&mut self, value: f64, impurity: f64, weight: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(-1);
        self.right.push(-1);
        self.value.push(value);
        self.impurity.push(impurity);
        self.weight.push(weight);
        self.feature.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub(crate) fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let n_trees = self.trees.len() as f64;
        let mut row = vec![0.0; x.ncols()];
        x.rows()
            .into_iter()
            .map(|r| {
                row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
                self.trees
                    .iter()
                    .map(|t| t.value[t.leaf_index(&row)])
                    .sum::<f64>()
                    / n_trees
            })
            .collect()
    }

    pub(crate) fn impurity_importance(&self, n_features: usize) -> Vec<f64> {
        let mut total = vec![0.0; n_features];
        for t in &self.trees {
            let mut imp = vec![0.0; n_features];
            for k in 0..t.n_nodes() {
                if t.feature[k] < 0 {
                    continue;
                }
                let (l, r) = (t.left[k] as usize, t.right[k] as usize);
                let dec = t.weight[k] * t.impurity[k]
                    - t.weight[l] * t.impurity[l]
                    - t.weight[r] * t.impurity[r];
                imp[t.feature[k] as usize] += dec.max(0.0);
            }
            let s: f64 = imp.iter().sum();
            if s > 0.0 {
                total.iter_mut().zip(&imp).for_each(|(a, b)| *a += b / s);
            }
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|v| *v /= s);
        }
        total
    }

    pub(crate) fn path_attribution(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<f64>) {
        let (n, p) = x.dim();
        let n_trees = self.trees.len() as f64;
        let bias = self.trees.iter().map(|t| t.value[0]).sum::<f64>() / n_trees;
        let mut contrib = Array2::<f64>::zeros((n, p));
        let mut row = vec![0.0; p];
        for (i, r) in x.rows().into_iter().enumerate() {
            row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
            for t in &self.trees {
                let mut k = 0usize;
                while t.feature[k] >= 0 {
                    let f = t.feature[k] as usize;
                    let next = if row[f] <= t.threshold[k] {
                        t.left[k] as usize
                    } else {
                        t.right[k] as usize
                    };
                    contrib[[i, f]] += (t.value[next] - t.value[k]) / n_trees;
                    k = next;
                }
            }
        }
        (contrib, vec![bias; n])
    }
}

fn entropy(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for c in [w0, w1] {
        if c > 0.0 {
            let q = c / w;
            h -= q * q.log2();
        }
    }
    h
}

struct Builder<'a> {
    cols: &'a [Vec<f64>],
    class: &'a [u8],
    class_w: [f64; 2],
    cfg: &'a ForestConfig,
    rng: rng::Rng,
    tree: Tree,
    scratch: Vec<(f64, usize)>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let (mut w0, mut w1) = (0.0, 0.0);
        for &i in idx.iter() {
            if self.class[i] == 1 {
                w1 += self.class_w[1];
            } else {
                w0 += self.class_w[0];
            }
        }
        let w = w0 + w1;
        let imp = entropy(w0, w1);
        let node = self.tree.push_node(w1 / w, imp, w);

        if depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split || imp <= 0.0 {
            return node;
        }
        let Some((feat, thr)) = self.best_split(idx, w0, w1, imp) else {
            return node;
        };

        let col = &self.cols[feat];
        let mut split = 0;
        for k in 0..idx.len() {
            if col[idx[k]] <= thr {
                idx.swap(k, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.tree.feature[node] = feat as i32;
        self.tree.threshold[node] = thr;
        self.tree.left[node] = left as i32;
        self.tree.right[node] = right as i32;
        node
    }

    fn best_split(&mut self, idx: &[usize], w0: f64, w1: f64, imp: f64) -> Option<(usize, f64)> {
        let p = self.cols.len();
        let mut feats = sample(&mut self.rng, p, self.cfg.max_features).into_vec();
        feats.sort_unstable();
        let n = idx.len();
        let w = w0 + w1;
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &feats {
            let col = &self.cols[f];
            self.scratch.clear();
            self.scratch.extend(idx.iter().map(|&i| (col[i], i)));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut l0, mut l1) = (0.0, 0.0);
            for pos in 0..n - 1 {
                let (x, i) = self.scratch[pos];
                if self.class[i] == 1 {
                    l1 += self.class_w[1];
                } else {
                    l0 += self.class_w[0];
                }
                let next = self.scratch[pos + 1].0;
                if next <= x {
                    continue;
                }
                let nl = pos + 1;
                if nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let wl = l0 + l1;
                let wr = w - wl;
                let gain = imp - (wl / w) * entropy(l0, l1) - (wr / w) * entropy(w0 - l0, w1 - l1);
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, 0.5 * (x + next)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

pub(crate) fn fit(train: &Dataset, cfg: &ForestConfig) -> Result<Forest> {
    let p = train.n_features();
    cfg.validate(p)?;
    let cols: Vec<Vec<f64>> = (0..p).map(|j| train.column(j)).collect();
    let class = train.target();
    let n = class.len();
    let n1 = class.iter().filter(|&&c| c == 1).count() as f64;
    let n0 = n as f64 - n1;
    let class_w = match cfg.class_weight {
        ClassWeight::Balanced => [n as f64 / (2.0 * n0), n as f64 / (2.0 * n1)],
        ClassWeight::None => [1.0, 1.0],
    };
    let tree_root = rng::derive_seed(cfg.seed, stream::TREES);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::rng(rng::derive_seed(tree_root, t as u64));
            let mut idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                cols: &cols,
                class,
                class_w,
                cfg,
                rng,
                tree: Tree {
                    feature: Vec::new(),
                    threshold: Vec::new(),
                    left: Vec::new(),
                    right: Vec::new(),
                    value: Vec::new(),
                    impurity: Vec::new(),
                    weight: Vec::new(),
                },
                scratch: Vec::with_capacity(n),
            };
            b.grow(&mut idx, 0);
            b.tree
        })
        .collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit_forest, Classifier};
    use ndarray::Array2;

    fn step_data() -> Dataset {
        let n = 30;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let y = (0..n).map(|i| (i >= 12) as u8).collect();
        Dataset::new(x, y, vec!["x".into()]).unwrap()
    }

    fn small_cfg() -> ForestConfig {
        ForestConfig {
            n_trees: 1,
            max_depth: 1,
            max_features: 1,
            min_samples_leaf: 1,
            min_samples_split: 2,
            bootstrap: false,
            class_weight: ClassWeight::None,
            ..Default::default()
        }
    }

    #[test]
    fn single_stump_fits_step() {
        let d = step_data();
        let p = fit_forest(&d, &small_cfg()).unwrap();
        let t = &p.as_forest().unwrap().trees[0];
        assert_eq!(t.threshold[0], 11.5);
        let pred = p.predict(d.features()).unwrap();
        for (prob, y) in pred.iter().zip(d.target()) {
            assert_eq!(*prob, *y as f64);
        }
        assert_eq!(p.gini_importance().unwrap(), vec![1.0]);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(1.0, 1.0), 1.0);
        assert_eq!(entropy(3.0, 0.0), 0.0);
    }

    #[test]
    fn max_features_above_p_is_rejected() {
        let cfg = ForestConfig { max_features: 2, ..small_cfg() };
        assert!(matches!(fit_forest(&step_data(), &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn road_configuration_is_accepted() {
        let spec = crate::dataset::SyntheticSpec::pareto(4, 2, 2.0, 300, 9);
        let d = spec.generate().unwrap().dataset;
        let cfg = ForestConfig { n_trees: 20, ..ForestConfig::default() };
        assert!(cfg.validate(6).is_ok());
        let p = fit_forest(&d, &cfg).unwrap();
        let f = p.as_forest().unwrap();
        assert!(f.trees.iter().all(|t| t.depth() <= 20));
        let probs = p.predict(d.features()).unwrap();
        assert!(probs.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn balanced_weights_center_the_root() {
        let d = step_data();
        let cfg = ForestConfig {
            class_weight: ClassWeight::Balanced,
            ..small_cfg()
        };
        let p = fit_forest(&d, &cfg).unwrap();
        let t = &p.as_forest().unwrap().trees[0];
        assert!((t.value[0] - 0.5).abs() < 1e-12);
    }
}
