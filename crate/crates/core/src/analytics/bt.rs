//! Bradley-Terry maximum-likelihood ratings.
//!
//! Maximizes `sum log sigma(theta_w - theta_l) - ridge * |theta|^2` subject to
//! `mean(theta) = 0` by damped Newton steps in the reduced coordinates
//! `theta = A z`, `A = [I; -1^T]`, so the constraint holds exactly at every
//! iterate.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::LN_10;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points per unit of `theta`: the usual 400-per-factor-of-ten arena scale.
pub const SCALE: f64 = 400.0 / LN_10;
pub const ANCHOR: f64 = 1000.0;
/// Ridge applied when the win graph is not strongly connected.
pub const DEFAULT_RIDGE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub winner_model: String,
    pub loser_model: String,
    pub scenario: String,
    pub ticket_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtOptions {
    /// `None` picks 0 for strongly connected data and [`DEFAULT_RIDGE`] otherwise.
    pub ridge: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self {
            ridge: None,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEntry {
    pub model: String,
    pub rating: f64,
    pub theta: f64,
    pub games: u64,
    pub wins: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTable {
    /// Sorted by rating, best first; ties by model id.
    pub entries: Vec<RatingEntry>,
    pub ridge: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Weakly connected components of the comparison graph. More than one
    /// means ratings across components are not comparable.
    pub components: Vec<Vec<String>>,
    /// Every model has beaten and lost to the rest of the field somewhere on a cycle.
    pub strongly_connected: bool,
}

impl RatingTable {
    pub fn get(&self, model: &str) -> Option<&RatingEntry> {
        self.entries.iter().find(|e| e.model == model)
    }

    pub fn mean_rating(&self) -> f64 {
        self.entries.iter().map(|e| e.rating).sum::<f64>() / self.entries.len() as f64
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BtError {
    #[error("no comparisons to fit")]
    Empty,
    #[error("a self-play comparison ({0}) cannot enter the fit")]
    SelfPlay(String),
    #[error("win graph is not strongly connected, so the unpenalized maximum does not exist; use a ridge > 0")]
    OneSided,
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
}

/// Aggregated wins: `wins[i][j]` = times model `i` beat model `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WinCounts {
    pub models: Vec<String>,
    pub wins: Vec<Vec<f64>>,
}

impl WinCounts {
    pub fn from_pairs(pairs: &[PairOutcome]) -> Result<Self, BtError> {
        if pairs.is_empty() {
            return Err(BtError::Empty);
        }
        let models: Vec<String> = pairs
            .iter()
            .flat_map(|p| [p.winner_model.clone(), p.loser_model.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = models.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
        let k = models.len();
        let mut wins = vec![vec![0.0; k]; k];
        for p in pairs {
            if p.winner_model == p.loser_model {
                return Err(BtError::SelfPlay(p.winner_model.clone()));
            }
            wins[index[p.winner_model.as_str()]][index[p.loser_model.as_str()]] += 1.0;
        }
        Ok(Self { models, wins })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Penalized log-likelihood.
    pub fn objective(&self, theta: &[f64], ridge: f64) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.wins.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    total -= w * softplus(theta[j] - theta[i]);
                }
            }
        }
        total - ridge * theta.iter().map(|t| t * t).sum::<f64>()
    }

    /// Gradient of [`WinCounts::objective`] with respect to `theta`.
    pub fn gradient(&self, theta: &[f64], ridge: f64) -> Vec<f64> {
        let mut g: Vec<f64> = theta.iter().map(|t| -2.0 * ridge * t).collect();
        for (i, row) in self.wins.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    let q = w * sigmoid(theta[j] - theta[i]);
                    g[i] += q;
                    g[j] -= q;
                }
            }
        }
        g
    }

    /// Negated Hessian of the objective (positive semidefinite).
    fn neg_hessian(&self, theta: &[f64], ridge: f64) -> DMatrix<f64> {
        let k = self.len();
        let mut h = DMatrix::from_diagonal_element(k, k, 2.0 * ridge);
        for (i, row) in self.wins.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    let p = sigmoid(theta[i] - theta[j]);
                    let c = w * p * (1.0 - p);
                    h[(i, i)] += c;
                    h[(j, j)] += c;
                    h[(i, j)] -= c;
                    h[(j, i)] -= c;
                }
            }
        }
        h
    }

    fn reachable(&self, start: usize, forward: bool) -> Vec<bool> {
        let k = self.len();
        let mut seen = vec![false; k];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let edge = if forward { self.wins[i][j] } else { self.wins[j][i] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    }

    /// True when every model can reach every other along "beat" edges.
    pub fn strongly_connected(&self) -> bool {
        self.len() <= 1 || (self.reachable(0, true).iter().all(|&s| s) && self.reachable(0, false).iter().all(|&s| s))
    }

    /// Components of the undirected comparison graph, each sorted, in order of first model.
    pub fn components(&self) -> Vec<Vec<String>> {
        let k = self.len();
        let mut label = vec![usize::MAX; k];
        let mut out = Vec::new();
        for start in 0..k {
            if label[start] != usize::MAX {
                continue;
            }
            let mut members = Vec::new();
            let mut stack = vec![start];
            label[start] = out.len();
            while let Some(i) = stack.pop() {
                members.push(i);
                for j in 0..k {
                    if (self.wins[i][j] > 0.0 || self.wins[j][i] > 0.0) && label[j] == usize::MAX {
                        label[j] = out.len();
                        stack.push(j);
                    }
                }
            }
            members.sort_unstable();
            out.push(members.into_iter().map(|i| self.models[i].clone()).collect());
        }
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Maps reduced coordinates to a mean-zero `theta`.
fn expand(z: &DVector<f64>) -> Vec<f64> {
    let mut theta: Vec<f64> = z.iter().copied().collect();
    theta.push(-z.sum());
    theta
}

/// `A^T v` for `A = [I; -1^T]`.
fn reduce(v: &[f64]) -> DVector<f64> {
    let last = v[v.len() - 1];
    DVector::from_iterator(v.len() - 1, v[..v.len() - 1].iter().map(|x| x - last))
}

fn reduce_matrix(h: &DMatrix<f64>) -> DMatrix<f64> {
    let k = h.nrows();
    let m = k - 1;
    DMatrix::from_fn(m, m, |i, j| {
        h[(i, j)] - h[(i, k - 1)] - h[(k - 1, j)] + h[(k - 1, k - 1)]
    })
}

pub struct BtFit {
    pub theta: Vec<f64>,
    pub ridge: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Solves for `theta` on aggregated counts.
pub fn solve(counts: &WinCounts, opts: &BtOptions) -> Result<BtFit, BtError> {
    let k = counts.len();
    let strongly = counts.strongly_connected();
    let ridge = match opts.ridge {
        Some(r) => r.max(0.0),
        None if strongly => 0.0,
        None => DEFAULT_RIDGE,
    };
    if ridge == 0.0 && !strongly {
        return Err(BtError::OneSided);
    }
    if k == 1 {
        return Ok(BtFit {
            theta: vec![0.0],
            ridge,
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let mut z = DVector::zeros(k - 1);
    let mut theta = expand(&z);
    let mut value = counts.objective(&theta, ridge);
    let mut grad = reduce(&counts.gradient(&theta, ridge));
    let mut iterations = 0;
    while grad.norm() > opts.tol {
        if iterations >= opts.max_iter {
            return Err(BtError::NonConvergence {
                iterations,
                gradient_norm: grad.norm(),
            });
        }
        iterations += 1;
        let h = reduce_matrix(&counts.neg_hessian(&theta, ridge));
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&grad),
            // Numerically flat direction: fall back to a scaled gradient step.
            None => &grad / (h.diagonal().max().max(1.0)),
        };
        if grad.dot(&step) <= 1e-10 * (1.0 + value.abs()) {
            // Inside the quadratic region the objective no longer resolves the
            // improvement, so a line search cannot judge it; take the full step.
            z += &step;
            theta = expand(&z);
            value = counts.objective(&theta, ridge);
            grad = reduce(&counts.gradient(&theta, ridge));
            continue;
        }
        let mut t = 1.0;
        let accepted = loop {
            let candidate = &z + &step * t;
            let cand_theta = expand(&candidate);
            let cand_value = counts.objective(&cand_theta, ridge);
            if cand_value >= value + 1e-4 * t * grad.dot(&step) || t < 1e-12 {
                break (cand_value >= value).then_some((candidate, cand_theta, cand_value));
            }
            t *= 0.5;
        };
        let Some((nz, ntheta, nvalue)) = accepted else {
            // No ascent possible at machine precision; accept if we are as close as floats allow.
            break;
        };
        z = nz;
        theta = ntheta;
        value = nvalue;
        grad = reduce(&counts.gradient(&theta, ridge));
    }
    let gradient_norm = grad.norm();
    if gradient_norm > opts.tol {
        return Err(BtError::NonConvergence {
            iterations,
            gradient_norm,
        });
    }
    Ok(BtFit {
        theta,
        ridge,
        iterations,
        gradient_norm,
    })
}

pub fn to_rating(theta: f64) -> f64 {
    ANCHOR + SCALE * theta
}

/// Fits ratings to individual game results.
pub fn fit_bradley_terry(pairs: &[PairOutcome], opts: &BtOptions) -> Result<RatingTable, BtError> {
    let counts = WinCounts::from_pairs(pairs)?;
    let fit = solve(&counts, opts)?;
    let mut entries: Vec<RatingEntry> = counts
        .models
        .iter()
        .enumerate()
        .map(|(i, model)| {
            let wins: f64 = counts.wins[i].iter().sum();
            let losses: f64 = counts.wins.iter().map(|row| row[i]).sum();
            RatingEntry {
                model: model.clone(),
                rating: to_rating(fit.theta[i]),
                theta: fit.theta[i],
                games: (wins + losses) as u64,
                wins: wins as u64,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.rating.total_cmp(&a.rating).then_with(|| a.model.cmp(&b.model)));
    Ok(RatingTable {
        entries,
        ridge: fit.ridge,
        iterations: fit.iterations,
        gradient_norm: fit.gradient_norm,
        components: counts.components(),
        strongly_connected: counts.strongly_connected(),
    })
}
