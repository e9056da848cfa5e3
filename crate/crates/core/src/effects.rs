//! Accumulated local effects and the two complexity statistics built on them:
//! the interaction strength (IAS) and the main-effect complexity (MEC).

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{bootstrap_rows, Dataset};
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::rng::{self, stream};
use crate::stats;

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_EPSILON: f64 = 0.05;

/// First-order ALE of one feature.
///
/// The effect is piecewise linear between bin edges. `values` holds the
/// centered effect at each bin center, which is the midpoint of the two edge
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AleCurve {
    pub feature: String,
    pub bin_edges: Vec<f64>,
    pub bin_centers: Vec<f64>,
    pub values: Vec<f64>,
    /// Centered effect at each bin edge.
    pub edge_values: Vec<f64>,
    /// Training rows falling in each bin.
    pub bin_counts: Vec<usize>,
    pub center_constant: f64,
    /// Population variance of the interpolated effect over the data.
    pub variance: f64,
}

impl AleCurve {
    /// Effect at `x`, clamped to the outer edges.
    pub fn interpolate(&self, x: f64) -> f64 {
        let e = &self.bin_edges;
        let last = e.len() - 1;
        if x <= e[0] {
            return self.edge_values[0];
        }
        if x >= e[last] {
            return self.edge_values[last];
        }
        // first edge strictly greater than x
        let k = e.partition_point(|&v| v <= x);
        let (x0, x1) = (e[k - 1], e[k]);
        let t = (x - x0) / (x1 - x0);
        self.edge_values[k - 1] + t * (self.edge_values[k] - self.edge_values[k - 1])
    }

    pub fn n_bins(&self) -> usize {
        self.values.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_center,value\n");
        for (c, v) in self.bin_centers.iter().zip(&self.values) {
            out.push_str(&format!("{c},{v}\n"));
        }
        out
    }

    fn flat(feature: &str, at: f64, n: usize) -> Self {
        AleCurve {
            feature: feature.to_string(),
            bin_edges: vec![at, at],
            bin_centers: vec![at],
            values: vec![0.0],
            edge_values: vec![0.0, 0.0],
            bin_counts: vec![n],
            center_constant: 0.0,
            variance: 0.0,
        }
    }
}

/// Quantile edges drawn from the observed values, so no bin is empty.
fn quantile_edges(sorted: &[f64], n_bins: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| {
            let idx = (k as f64 / n_bins as f64 * (n - 1) as f64).round() as usize;
            sorted[idx]
        })
        .collect();
    edges.dedup();
    edges
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    // bins are [e0, e1], (e1, e2], ...
    let k = edges.partition_point(|&v| v < x);
    k.saturating_sub(1).min(edges.len() - 2)
}

/// ALE of `feature` under `model`, estimated on `data`.
pub fn compute_ale<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    feature: &str,
    n_bins: usize,
) -> Result<AleCurve> {
    if n_bins < 2 {
        return Err(Error::InvalidArgument("n_bins must be at least 2".into()));
    }
    let j = data
        .feature_index(feature)
        .ok_or_else(|| Error::UnknownFeatures(vec![feature.to_string()]))?;
    let x = data.features();
    let col = data.column(j);
    let mut sorted = col.clone();
    sorted.sort_by(f64::total_cmp);
    let edges = quantile_edges(&sorted, n_bins);
    if edges.len() < 2 {
        return Err(Error::ConstantFeature(feature.to_string()));
    }
    let k_bins = edges.len() - 1;
    let bins: Vec<usize> = col.iter().map(|&v| bin_of(&edges, v)).collect();

    let n = data.n_rows();
    let mut probe = Array2::zeros((2 * n, x.ncols()));
    for i in 0..n {
        let b = bins[i];
        let mut lo = probe.row_mut(2 * i);
        lo.assign(&x.row(i));
        lo[j] = edges[b];
        let mut hi = probe.row_mut(2 * i + 1);
        hi.assign(&x.row(i));
        hi[j] = edges[b + 1];
    }
    let out = model.predict(probe.view())?;

    let mut sums = vec![0.0; k_bins];
    let mut counts = vec![0usize; k_bins];
    for i in 0..n {
        sums[bins[i]] += out[2 * i + 1] - out[2 * i];
        counts[bins[i]] += 1;
    }
    let mut edge_values = vec![0.0; k_bins + 1];
    for k in 0..k_bins {
        edge_values[k + 1] = edge_values[k] + sums[k] / counts[k] as f64;
    }

    let mut curve = AleCurve {
        feature: feature.to_string(),
        bin_centers: edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        bin_edges: edges,
        values: vec![],
        edge_values,
        bin_counts: counts,
        center_constant: 0.0,
        variance: 0.0,
    };
    let raw: Vec<f64> = col.iter().map(|&v| curve.interpolate(v)).collect();
    let c = stats::mean(&raw);
    curve.edge_values.iter_mut().for_each(|v| *v -= c);
    curve.values = curve.edge_values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    curve.center_constant = c;
    curve.variance = stats::variance(&raw);
    Ok(curve)
}

/// One curve per feature; constant features get a flat zero curve.
pub fn compute_all_ale<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    n_bins: usize,
) -> Result<Vec<AleCurve>> {
    data.feature_names()
        .par_iter()
        .enumerate()
        .map(|(j, name)| match compute_ale(model, data, name, n_bins) {
            Err(Error::ConstantFeature(_)) => {
                log::warn!("feature `{name}` is constant; its effect is set to zero");
                Ok(AleCurve::flat(name, data.features()[[0, j]], data.n_rows()))
            }
            other => other,
        })
        .collect()
}

/// `f0 + sum_j ALE_j(x_j)` for every row of `x`, whose columns are `feature_names`.
pub fn first_order_predict(
    curves: &[AleCurve],
    f0: f64,
    x: ArrayView2<'_, f64>,
    feature_names: &[String],
) -> Result<Vec<f64>> {
    if x.ncols() != feature_names.len() {
        return Err(Error::ShapeMismatch {
            expected: feature_names.len(),
            actual: x.ncols(),
        });
    }
    let by_name: BTreeMap<&str, &AleCurve> = curves.iter().map(|c| (c.feature.as_str(), c)).collect();
    let mut ordered = Vec::with_capacity(feature_names.len());
    let mut missing = vec![];
    for name in feature_names {
        match by_name.get(name.as_str()) {
            Some(c) => ordered.push(*c),
            None => missing.push(name.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnknownFeatures(missing));
    }
    Ok(x.axis_iter(Axis(0))
        .map(|row| f0 + ordered.iter().zip(row.iter()).map(|(c, &v)| c.interpolate(v)).sum::<f64>())
        .collect())
}

fn ias_with_curves(pred: &[f64], curves: &[AleCurve], data: &Dataset) -> Result<f64> {
    let f0 = stats::mean(pred);
    let first = first_order_predict(curves, f0, data.features(), data.feature_names())?;
    let num: f64 = pred.iter().zip(&first).map(|(f, g)| (f - g).powi(2)).sum();
    let den: f64 = pred.iter().map(|f| (f - f0).powi(2)).sum();
    if pred.iter().all(|f| *f == pred[0]) || !(den > 0.0) {
        return Err(Error::ZeroVariance("model output"));
    }
    Ok(num / den)
}

/// Share of output variance not explained by the first-order ALE model.
pub fn ias<M: Classifier + ?Sized>(model: &M, data: &Dataset, n_bins: usize) -> Result<f64> {
    let pred = model.predict(data.features())?;
    let curves = compute_all_ale(model, data, n_bins)?;
    ias_with_curves(&pred, &curves, data)
}

/// Outcome of the greedy segmentation of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub segments: usize,
    /// Bin centers closing every segment but the last.
    pub knots: Vec<f64>,
    pub r2: f64,
}

struct Fit {
    ss_res: f64,
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Fit {
    let sw: f64 = w.iter().sum();
    if x.len() < 2 || sw == 0.0 {
        return Fit { ss_res: 0.0 };
    }
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..x.len() {
        sxx += w[i] * (x[i] - mx).powi(2);
        sxy += w[i] * (x[i] - mx) * (y[i] - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let ss_res = (0..x.len())
        .map(|i| w[i] * (y[i] - my - slope * (x[i] - mx)).powi(2))
        .sum();
    Fit { ss_res }
}

/// Number of line segments needed for weighted R^2 > 1 - epsilon.
///
/// Starting from one line, the segment with the largest residual is split at
/// the interior bin center giving the smallest two-piece residual, until the
/// target is met or no segment can be split. Neighbouring segments share the
/// knot center but are fit independently.
pub fn mec_feature(curve: &AleCurve, epsilon: f64) -> Segmentation {
    let x = &curve.bin_centers;
    let y = &curve.values;
    let w: Vec<f64> = curve.bin_counts.iter().map(|&c| c as f64).collect();
    let n = x.len();
    let sw: f64 = w.iter().sum();
    let my = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ss_tot: f64 = y.iter().zip(&w).map(|(v, b)| b * (v - my).powi(2)).sum();
    if n < 3 || !(ss_tot > 1e-30) {
        return Segmentation {
            segments: 1,
            knots: vec![],
            r2: 1.0,
        };
    }
    // inclusive index ranges
    let fit = |a: usize, b: usize| weighted_line(&x[a..=b], &y[a..=b], &w[a..=b]).ss_res;

    let mut segs: Vec<(usize, usize, f64)> = vec![(0, n - 1, fit(0, n - 1))];
    let r2 = |segs: &[(usize, usize, f64)]| 1.0 - segs.iter().map(|s| s.2).sum::<f64>() / ss_tot;
    while r2(&segs) <= 1.0 - epsilon {
        let Some(worst) = (0..segs.len())
            .filter(|&i| segs[i].1 - segs[i].0 >= 2)
            .max_by(|&a, &b| segs[a].2.total_cmp(&segs[b].2).then(b.cmp(&a)))
        else {
            break;
        };
        let (a, b, _) = segs[worst];
        let mut best: Option<(usize, f64, f64)> = None;
        for s in a + 1..b {
            let (l, r) = (fit(a, s), fit(s, b));
            if best.is_none_or(|(_, bl, br)| l + r < bl + br) {
                best = Some((s, l, r));
            }
        }
        let (s, l, r) = best.expect("segment has an interior center");
        segs[worst] = (a, s, l);
        segs.insert(worst + 1, (s, b, r));
    }
    Segmentation {
        segments: segs.len(),
        knots: segs[..segs.len() - 1].iter().map(|s| x[s.1]).collect(),
        r2: r2(&segs).min(1.0),
    }
}

/// Variance-weighted mean segment count across curves.
pub fn mec(curves: &[AleCurve], epsilon: f64) -> Result<f64> {
    let total: f64 = curves.iter().map(|c| c.variance).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVariance("every ALE curve"));
    }
    Ok(curves
        .iter()
        .filter(|c| c.variance > 0.0)
        .map(|c| c.variance * mec_feature(c, epsilon).segments as f64)
        .sum::<f64>()
        / total)
}

/// Bootstrap summary of IAS and MEC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub ias_mean: f64,
    pub ias_sd: f64,
    pub mec_mean: f64,
    pub mec_sd: f64,
    /// Mean segment count per feature across replicates.
    pub per_feature_mec: BTreeMap<String, f64>,
    pub n_boot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConfig {
    pub n_boot: usize,
    pub n_bins: usize,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            n_boot: 100,
            n_bins: DEFAULT_BINS,
            epsilon: DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

pub fn complexity_report<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    cfg: &ComplexityConfig,
) -> Result<ComplexityReport> {
    if cfg.n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be positive".into()));
    }
    let root = rng::derive_seed(cfg.seed, stream::BOOTSTRAP);
    let reps: Vec<(f64, f64, Vec<usize>)> = (0..cfg.n_boot)
        .into_par_iter()
        .map(|b| {
            let rows = bootstrap_rows(data.target(), rng::derive_seed(root, b as u64))?;
            let sample = data.select_rows(&rows)?;
            let pred = model.predict(sample.features())?;
            let curves = compute_all_ale(model, &sample, cfg.n_bins)?;
            let ias = ias_with_curves(&pred, &curves, &sample)?;
            let m = mec(&curves, cfg.epsilon)?;
            let per = curves.iter().map(|c| mec_feature(c, cfg.epsilon).segments).collect();
            Ok((ias, m, per))
        })
        .collect::<Result<_>>()?;
    let ias: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let mecs: Vec<f64> = reps.iter().map(|r| r.1).collect();
    let per_feature_mec = data
        .feature_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let s: usize = reps.iter().map(|r| r.2[j]).sum();
            (name.clone(), s as f64 / cfg.n_boot as f64)
        })
        .collect();
    Ok(ComplexityReport {
        ias_mean: stats::mean(&ias),
        ias_sd: stats::sample_sd(&ias),
        mec_mean: stats::mean(&mecs),
        mec_sd: stats::sample_sd(&mecs),
        per_feature_mec,
        n_boot: cfg.n_boot,
    })
}

/// Variance of each feature's ALE, a model-agnostic importance score.
/// Constant features score 0.
pub fn ale_variance_scores<M: Classifier + ?Sized>(
    model: &M,
    data: &Dataset,
    n_bins: usize,
) -> Result<Vec<f64>> {
    Ok(compute_all_ale(model, data, n_bins)?.iter().map(|c| c.variance).collect())
}
