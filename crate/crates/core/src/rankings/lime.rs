use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shapley::sample_rows;
use super::{RankingScorecard, ScoreKind};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::rng::{self, stream};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub n_perturb: usize,
    /// Kernel width in standardized units; `0.75 * sqrt(P)` when unset.
    pub kernel_width: Option<f64>,
    /// Ridge penalty relative to the total kernel weight.
    pub ridge: f64,
    pub max_instances: usize,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_perturb: 1000,
            kernel_width: None,
            ridge: 1e-4,
            max_instances: 100,
            seed: 0,
        }
    }
}

/// Local surrogate slopes at `x`, one per feature, per standard deviation of
/// the feature. Perturbations are Gaussian with half the feature's standard
/// deviation; constant features (`sd == 0`) get slope 0.
pub fn lime_surrogate<M: Classifier + ?Sized>(
    model: &M,
    x: ArrayView1<'_, f64>,
    sd: &[f64],
    cfg: &LimeConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let p = x.len();
    let n = cfg.n_perturb;
    if n < 2 {
        return Err(Error::InvalidArgument("n_perturb must be at least 2".into()));
    }
    let width = cfg.kernel_width.unwrap_or(0.75 * (p as f64).sqrt());
    if !(width > 0.0) {
        return Err(Error::InvalidArgument("kernel width must be positive".into()));
    }
    let active: Vec<usize> = (0..p).filter(|&j| sd[j] > 0.0).collect();
    let mut r = rng::rng(seed);
    let u = Array2::from_shape_fn((n, p), |(_, j)| {
        let e: f64 = r.sample(StandardNormal);
        if sd[j] > 0.0 { 0.5 * e } else { 0.0 }
    });
    let mut z = x.broadcast((n, p)).expect("row broadcast").to_owned();
    for j in 0..p {
        let mut c = z.column_mut(j);
        c.zip_mut_with(&u.column(j), |v, o| *v += o * sd[j]);
    }
    let f = model.predict(z.view())?;
    let w: Vec<f64> = u
        .axis_iter(Axis(0))
        .map(|row| (-row.iter().map(|v| v * v).sum::<f64>() / (width * width)).exp())
        .collect();
    let sw: f64 = w.iter().sum();
    if active.is_empty() {
        return Ok(vec![0.0; p]);
    }
    // weighted centering leaves the intercept out of the penalized system
    let q = active.len();
    let um: Vec<f64> = active
        .iter()
        .map(|&j| (0..n).map(|i| w[i] * u[[i, j]]).sum::<f64>() / sw)
        .collect();
    let fm = (0..n).map(|i| w[i] * f[i]).sum::<f64>() / sw;
    let uc = DMatrix::from_fn(n, q, |i, k| u[[i, active[k]]] - um[k]);
    let wv = DVector::from_vec(w.clone());
    let fc = DVector::from_fn(n, |i, _| f[i] - fm);
    let mut a = DMatrix::zeros(q, q);
    let mut b = DVector::zeros(q);
    for i in 0..n {
        let row = uc.row(i);
        a += wv[i] * row.transpose() * row;
        b += wv[i] * fc[i] * row.transpose();
    }
    for k in 0..q {
        a[(k, k)] += cfg.ridge * sw;
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Singular("LIME surrogate normal equations".into()))?;
    let coef = chol.solve(&b);
    let mut out = vec![0.0; p];
    for (k, &j) in active.iter().enumerate() {
        out[j] = coef[k];
    }
    Ok(out)
}

/// Mean absolute surrogate slope over sampled rows of `data`.
pub fn lime_relevance<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    cfg: &LimeConfig,
) -> Result<RankingScorecard> {
    let x = data.features();
    let sd: Vec<f64> = (0..data.n_features())
        .map(|j| stats::variance(&data.column(j)).sqrt())
        .collect();
    let inst = sample_rows(data.n_rows(), cfg.max_instances, rng::derive_seed(cfg.seed, stream::INSTANCES));
    let root = rng::derive_seed(cfg.seed, stream::PERMUTE);
    let coefs: Vec<Vec<f64>> = inst
        .par_iter()
        .map(|&i| lime_surrogate(model, x.row(i), &sd, cfg, rng::derive_seed(root, i as u64)))
        .collect::<Result<_>>()?;
    let scores = (0..data.n_features())
        .map(|j| coefs.iter().map(|c| c[j].abs()).sum::<f64>() / coefs.len() as f64)
        .collect();
    Ok(RankingScorecard::from_scores("lime", data.feature_names().to_vec(), scores, ScoreKind::Relevance)
        .with_meta(cfg.n_perturb, cfg.seed))
}
