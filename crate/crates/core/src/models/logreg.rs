//! Elastic-net logistic regression.
//!
//! Minimizes, over standardized features,
//!
//! ```text
//! sum_i logloss_i + (1/C) * [ l1_ratio * |b|_1 + (1 - l1_ratio)/2 * |b|_2^2 ]
//! ```
//!
//! with an unpenalized intercept. Internally the loss is divided by `n`, giving
//! a per-sample penalty weight `lambda = 1 / (C n)`. Each outer iteration forms
//! the quadratic (IRLS) approximation of the log-loss and solves the penalized
//! weighted least-squares problem by cyclic coordinate descent with
//! soft-thresholding; a backtracking step keeps the true objective monotone.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dataset::{sigmoid, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegConfig {
    /// Inverse regularization strength.
    pub c: f64,
    /// Share of the penalty that is L1.
    pub l1_ratio: f64,
    pub max_iter: usize,
    /// Convergence threshold on the largest coefficient change.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            l1_ratio: 0.5,
            max_iter: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

impl LogRegConfig {
    /// Tuned values for the reduced tornado model.
    pub fn tornado() -> Self {
        Self {
            c: 0.1,
            l1_ratio: 0.0001,
            ..Self::default()
        }
    }

    pub fn severe_hail() -> Self {
        Self {
            c: 0.01,
            l1_ratio: 0.01,
            ..Self::default()
        }
    }

    pub fn severe_wind() -> Self {
        Self {
            c: 0.01,
            l1_ratio: 0.001,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidConfig(format!(
                "l1_ratio must lie in [0, 1], got {}",
                self.l1_ratio
            )));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted logistic regression. Coefficients live in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
    /// Final value of the per-sample objective.
    pub objective: f64,
}

impl LogisticModel {
    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows()
            .into_iter()
            .map(|row| {
                let mut eta = self.intercept;
                for (j, v) in row.iter().enumerate() {
                    eta += self.coefficients[j] * (v - self.means[j]) / self.scales[j];
                }
                eta
            })
            .collect()
    }

    pub(crate) fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        self.decision(x).into_iter().map(sigmoid).collect()
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

struct Problem<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    lambda: f64,
    alpha: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n()];
        for (col, &b) in self.cols.iter().zip(beta) {
            if b != 0.0 {
                eta.iter_mut().zip(col).for_each(|(e, x)| *e += b * x);
            }
        }
        eta
    }

    fn objective(&self, b0: f64, beta: &[f64]) -> f64 {
        let eta = self.eta(b0, beta);
        let loss: f64 = eta
            .iter()
            .zip(self.y)
            .map(|(&e, &y)| softplus(e) - y * e)
            .sum::<f64>()
            / self.n() as f64;
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        loss + self.lambda * (self.alpha * l1 + 0.5 * (1.0 - self.alpha) * l2)
    }
}

/// Value of the per-sample objective for given standardized parameters.
#[cfg(test)]
pub(crate) fn objective_value(
    cols: &[Vec<f64>],
    y: &[f64],
    c: f64,
    l1_ratio: f64,
    b0: f64,
    beta: &[f64],
) -> f64 {
    let p = Problem {
        cols,
        y,
        lambda: 1.0 / (c * y.len() as f64),
        alpha: l1_ratio,
    };
    p.objective(b0, beta)
}

pub(crate) fn standardize(train: &Dataset) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = train.n_rows() as f64;
    let mut cols = Vec::with_capacity(train.n_features());
    let mut means = Vec::new();
    let mut scales = Vec::new();
    for j in 0..train.n_features() {
        let mut col = train.column(j);
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let s = if var > 0.0 { var.sqrt() } else { 1.0 };
        col.iter_mut().for_each(|v| *v = (*v - m) / s);
        cols.push(col);
        means.push(m);
        scales.push(s);
    }
    (cols, means, scales)
}

pub(crate) fn fit(train: &Dataset, cfg: &LogRegConfig) -> Result<LogisticModel> {
    cfg.validate()?;
    let (cols, means, scales) = standardize(train);
    let y: Vec<f64> = train.target().iter().map(|&v| v as f64).collect();
    let n = y.len();
    let nf = n as f64;
    let p = cols.len();
    let prob = Problem {
        cols: &cols,
        y: &y,
        lambda: 1.0 / (cfg.c * nf),
        alpha: cfg.l1_ratio,
    };
    let l1 = prob.lambda * prob.alpha;
    let l2 = prob.lambda * (1.0 - prob.alpha);

    let base = train.base_rate();
    let mut b0 = (base / (1.0 - base)).ln();
    let mut beta = vec![0.0; p];
    let mut obj = prob.objective(b0, &beta);
    let mut converged = false;
    let mut n_iter = 0;

    let mut w = vec![0.0; n];
    let mut r = vec![0.0; n];
    for iter in 0..cfg.max_iter {
        n_iter = iter + 1;
        let eta = prob.eta(b0, &beta);
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            w[i] = (pi * (1.0 - pi)).max(1e-5);
            // residual of the working response z = eta + (y - p)/w
            r[i] = (y[i] - pi) / w[i];
        }
        let xw2: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / nf)
            .collect();
        let w_sum: f64 = w.iter().sum();

        let mut nb0 = b0;
        let mut nbeta = beta.clone();
        for _sweep in 0..1000 {
            let mut max_step: f64 = 0.0;
            let shift = w.iter().zip(&r).map(|(wi, ri)| wi * ri).sum::<f64>() / w_sum;
            if shift != 0.0 {
                nb0 += shift;
                r.iter_mut().for_each(|ri| *ri -= shift);
                max_step = max_step.max(shift.abs());
            }
            for j in 0..p {
                let denom = xw2[j] + l2;
                if denom <= 0.0 {
                    continue;
                }
                let col = &cols[j];
                let grad: f64 = col
                    .iter()
                    .zip(&w)
                    .zip(&r)
                    .map(|((x, wi), ri)| wi * x * ri)
                    .sum::<f64>()
                    / nf;
                let old = nbeta[j];
                let new = soft_threshold(grad + xw2[j] * old, l1) / denom;
                let d = new - old;
                if d != 0.0 {
                    r.iter_mut().zip(col).for_each(|(ri, x)| *ri -= d * x);
                    nbeta[j] = new;
                    max_step = max_step.max(d.abs());
                }
            }
            if max_step < cfg.tol * 0.1 {
                break;
            }
        }

        // Backtrack towards the previous iterate if the true objective rose.
        let mut t = 1.0;
        let mut cand_b0 = nb0;
        let mut cand = nbeta.clone();
        let mut cand_obj = prob.objective(cand_b0, &cand);
        let mut halvings = 0;
        while cand_obj > obj + 1e-14 * obj.abs().max(1.0) && halvings < 40 {
            t *= 0.5;
            halvings += 1;
            cand_b0 = b0 + t * (nb0 - b0);
            for j in 0..p {
                cand[j] = beta[j] + t * (nbeta[j] - beta[j]);
            }
            cand_obj = prob.objective(cand_b0, &cand);
        }
        if cand_obj > obj {
            // no descent along this direction: current iterate is optimal to
            // working precision
            converged = true;
            break;
        }
        let delta = beta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b).abs())
            .fold((b0 - cand_b0).abs(), f64::max);
        b0 = cand_b0;
        beta = cand;
        obj = cand_obj;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "logistic regression did not converge within {} iterations",
            cfg.max_iter
        );
    }
    Ok(LogisticModel {
        intercept: b0,
        coefficients: beta,
        means,
        scales,
        converged,
        n_iter,
        objective: obj,
    })
}
