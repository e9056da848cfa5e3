//! Verification scores for probabilistic binary forecasts and the
//! association statistics used to judge ranking faithfulness.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

/// Number of evenly spaced probability thresholds used by default.
pub const DEFAULT_THRESHOLDS: usize = 200;

fn check_inputs(y: &[u8], p: &[f64]) -> Result<(usize, usize)> {
    if y.len() != p.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targets but {} predictions",
            y.len(),
            p.len()
        )));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok((pos, y.len() - pos))
}

/// Area under the ROC curve: the probability that a random positive
/// outscores a random negative, ties counting one half.
pub fn roc_auc(y: &[u8], p: &[f64]) -> Result<f64> {
    let (n1, n0) = check_inputs(y, p)?;
    let ranks = stats::midranks(p);
    let pos_rank_sum: f64 = ranks.iter().zip(y).filter(|(_, &v)| v == 1).map(|(r, _)| r).sum();
    let n1f = n1 as f64;
    Ok((pos_rank_sum - n1f * (n1f + 1.0) / 2.0) / (n1f * n0 as f64))
}

/// `1 - BS / BS_climo`, where the climatological forecast is the sample
/// base rate.
pub fn brier_skill_score(y: &[u8], p: &[f64]) -> Result<f64> {
    let (n1, _) = check_inputs(y, p)?;
    let n = y.len() as f64;
    let b = n1 as f64 / n;
    let bs = y
        .iter()
        .zip(p)
        .map(|(&t, &q)| (q - t as f64).powi(2))
        .sum::<f64>()
        / n;
    Ok(1.0 - bs / (b * (1.0 - b)))
}

/// Contingency-table summaries at a sequence of descending thresholds.
/// A row is forecast positive when its probability is `>=` the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceDiagram {
    pub thresholds: Vec<f64>,
    /// Probability of detection, `hits / (hits + misses)`.
    pub pod: Vec<f64>,
    /// Success ratio, `hits / (hits + false alarms)`; 0 when nothing is forecast.
    pub sr: Vec<f64>,
    /// Critical success index, `hits / (hits + misses + false alarms)`.
    pub csi: Vec<f64>,
    /// Number of positive forecasts at each threshold.
    pub n_forecast: Vec<usize>,
    pub base_rate: f64,
}

impl PerformanceDiagram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,pod,sr,csi\n");
        for k in 0..self.thresholds.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.thresholds[k], self.pod[k], self.sr[k], self.csi[k]
            ));
        }
        out
    }
}

pub fn performance_curve(y: &[u8], p: &[f64], n_thresholds: usize) -> Result<PerformanceDiagram> {
    let (n1, _) = check_inputs(y, p)?;
    if n_thresholds < 2 {
        return Err(Error::InvalidArgument("at least two thresholds are required".into()));
    }
    let thresholds: Vec<f64> = (0..n_thresholds)
        .map(|k| (n_thresholds - 1 - k) as f64 / (n_thresholds - 1) as f64)
        .collect();
    Ok(curve_at(y, p, n1, thresholds))
}

fn curve_at(y: &[u8], p: &[f64], n1: usize, thresholds: Vec<f64>) -> PerformanceDiagram {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let (mut pod, mut sr, mut csi, mut n_forecast) = (vec![], vec![], vec![], vec![]);
    let (mut k, mut hits, mut fa) = (0usize, 0usize, 0usize);
    // thresholds are descending, so the forecast-positive set only grows
    for &t in &thresholds {
        while k < order.len() && p[order[k]] >= t {
            if y[order[k]] == 1 {
                hits += 1;
            } else {
                fa += 1;
            }
            k += 1;
        }
        let misses = n1 - hits;
        pod.push(hits as f64 / n1 as f64);
        sr.push(if hits + fa == 0 { 0.0 } else { hits as f64 / (hits + fa) as f64 });
        csi.push(hits as f64 / (hits + misses + fa) as f64);
        n_forecast.push(hits + fa);
    }
    PerformanceDiagram {
        thresholds,
        pod,
        sr,
        csi,
        n_forecast,
        base_rate: n1 as f64 / y.len() as f64,
    }
}

/// Area of the region under the performance-diagram curve.
///
/// Thresholds with no positive forecasts are skipped; the remaining points are
/// ordered by POD, points sharing a POD keep their largest SR, and the curve is
/// extended to POD = 0 at the SR of its lowest-POD point. The trapezoid rule
/// then integrates SR over POD.
pub fn aupdc(diagram: &PerformanceDiagram) -> f64 {
    let mut pts: Vec<(f64, f64)> = diagram
        .pod
        .iter()
        .zip(&diagram.sr)
        .zip(&diagram.n_forecast)
        .filter(|(_, &n)| n > 0)
        .map(|((&a, &b), _)| (a, b))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|next, kept| next.0 == kept.0);
    let Some(&(_, first_sr)) = pts.first() else {
        return 0.0;
    };
    let mut area = 0.0;
    let mut prev = (0.0, first_sr);
    for &(pod, sr) in &pts {
        area += (pod - prev.0) * (sr + prev.1) / 2.0;
        prev = (pod, sr);
    }
    area
}

/// Normalized AUPDC, `(AUPDC - b) / (1 - b)` with `b` the base rate.
pub fn naupdc(y: &[u8], p: &[f64]) -> Result<f64> {
    naupdc_with(y, p, DEFAULT_THRESHOLDS)
}

pub fn naupdc_with(y: &[u8], p: &[f64], n_thresholds: usize) -> Result<f64> {
    let d = performance_curve(y, p, n_thresholds)?;
    let b = d.base_rate;
    Ok((aupdc(&d) - b) / (1.0 - b))
}

/// Normalized maximum CSI, `(CSI_max - b) / (1 - b)`.
pub fn ncsi(y: &[u8], p: &[f64]) -> Result<f64> {
    ncsi_with(y, p, DEFAULT_THRESHOLDS)
}

pub fn ncsi_with(y: &[u8], p: &[f64], n_thresholds: usize) -> Result<f64> {
    let d = performance_curve(y, p, n_thresholds)?;
    let max = d.csi.iter().cloned().fold(0.0, f64::max);
    Ok((max - d.base_rate) / (1.0 - d.base_rate))
}

/// Skill score used to judge a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Naupdc,
    Auc,
    Bss,
    Ncsi,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Naupdc, Metric::Ncsi, Metric::Auc, Metric::Bss];

    pub fn evaluate(self, y: &[u8], p: &[f64]) -> Result<f64> {
        match self {
            Metric::Naupdc => naupdc(y, p),
            Metric::Auc => roc_auc(y, p),
            Metric::Bss => brier_skill_score(y, p),
            Metric::Ncsi => ncsi(y, p),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Naupdc => "naupdc",
            Metric::Auc => "auc",
            Metric::Bss => "bss",
            Metric::Ncsi => "ncsi",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "naupdc" => Ok(Metric::Naupdc),
            "auc" => Ok(Metric::Auc),
            "bss" => Ok(Metric::Bss),
            "ncsi" => Ok(Metric::Ncsi),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

/// Correspondence between total importance and model performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub kendall_tau: f64,
    /// Pearson correlation after log-transforming performance.
    pub log_pearson: f64,
    /// Coefficient of determination of the polynomial fit.
    pub r2: f64,
    pub mse: f64,
    pub n: usize,
}

/// Least-squares polynomial of `importance -> performance`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    /// Coefficients in powers of the min-max scaled input, constant first.
    pub coefficients: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub r2: f64,
    pub mse: f64,
}

/// Fit a degree-`degree` polynomial on min-max scaled `x` via SVD.
pub fn poly_fit(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    let n = x.len();
    let x_min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = x_max - x_min;
    if !(span > 0.0) {
        return Err(Error::ZeroVariance("importance"));
    }
    let a = DMatrix::from_fn(n, degree + 1, |i, k| ((x[i] - x_min) / span).powi(k as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let coef = svd
        .solve(&b, smax * 1e-13)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let fitted = &a * &coef;
    let ss_res: f64 = (0..n).map(|i| (y[i] - fitted[i]).powi(2)).sum();
    let my = stats::mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::ZeroVariance("performance"));
    }
    Ok(PolyFit {
        coefficients: coef.iter().cloned().collect(),
        x_min,
        x_max,
        r2: 1.0 - ss_res / ss_tot,
        mse: ss_res / n as f64,
    })
}

/// Map performance through `log(x - min(x) + eps)`, `eps = 1e-3 * range`.
pub fn log_transform(x: &[f64]) -> Result<Vec<f64>> {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::ZeroVariance("performance"));
    }
    let eps = 1e-3 * range;
    Ok(x.iter().map(|v| (v - lo + eps).ln()).collect())
}

/// All four statistics on one sample, without resampling.
pub fn fit_stats(importance: &[f64], performance: &[f64], degree: usize) -> Result<FitStats> {
    let tau = stats::kendall_tau_b(importance, performance)
        .ok_or(Error::ZeroVariance("importance or performance"))?;
    let logp = log_transform(performance)?;
    let log_pearson =
        stats::pearson(importance, &logp).ok_or(Error::ZeroVariance("importance"))?;
    let fit = poly_fit(importance, performance, degree)?;
    Ok(FitStats {
        kendall_tau: tau,
        log_pearson,
        r2: fit.r2,
        mse: fit.mse,
        n: importance.len(),
    })
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

/// Bootstrap means of Kendall tau-b, log-Pearson, polynomial R^2 and MSE.
pub fn association_stats(
    importance: &[f64],
    performance: &[f64],
    degree: usize,
    n_boot: usize,
    seed: u64,
) -> Result<FitStats> {
    let n = importance.len();
    if performance.len() != n {
        return Err(Error::InvalidArgument("importance and performance differ in length".into()));
    }
    if n < degree + 2 {
        return Err(Error::InvalidArgument(format!(
            "{n} pairs are too few for a degree-{degree} fit"
        )));
    }
    if n_boot == 0 {
        return Err(Error::InvalidArgument("n_boot must be positive".into()));
    }
    if is_constant(importance) {
        return Err(Error::ZeroVariance("importance"));
    }
    if is_constant(performance) {
        return Err(Error::ZeroVariance("performance"));
    }
    let mut acc = [0.0f64; 4];
    let (mut xb, mut yb) = (vec![0.0; n], vec![0.0; n]);
    for b in 0..n_boot {
        let mut r = rng::rng(rng::derive_seed(seed, b as u64));
        let mut attempts = 0;
        loop {
            for i in 0..n {
                let k = r.random_range(0..n);
                xb[i] = importance[k];
                yb[i] = performance[k];
            }
            if !is_constant(&xb) && !is_constant(&yb) {
                break;
            }
            attempts += 1;
            if attempts >= 1000 {
                return Err(Error::BootstrapExhausted(attempts));
            }
        }
        let s = fit_stats(&xb, &yb, degree)?;
        acc[0] += s.kendall_tau;
        acc[1] += s.log_pearson;
        acc[2] += s.r2;
        acc[3] += s.mse;
    }
    let k = n_boot as f64;
    Ok(FitStats {
        kendall_tau: acc[0] / k,
        log_pearson: acc[1] / k,
        r2: acc[2] / k,
        mse: acc[3] / k,
        n,
    })
}

/// Percentile interval `(low, high)` of the bootstrap distribution of the mean.
pub fn bootstrap_ci(samples: &[f64], n_boot: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} is outside (0, 1)")));
    }
    let n = samples.len();
    if n < 2 || n_boot == 0 {
        return Err(Error::InvalidArgument("need at least two samples and one resample".into()));
    }
    let mut r = rng::rng(seed);
    let mut means: Vec<f64> = (0..n_boot)
        .map(|_| (0..n).map(|_| samples[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    Ok(percentile_interval(&means, level))
}

/// Central `level` interval of an already sorted bootstrap distribution.
pub fn percentile_interval(sorted: &[f64], level: f64) -> (f64, f64) {
    let tail = (1.0 - level) / 2.0;
    (
        stats::quantile_sorted(sorted, tail),
        stats::quantile_sorted(sorted, 1.0 - tail),
    )
}
