//! Linear query workloads, answers over noisy data, and error metrics.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// An m x n matrix of linear queries with per-query importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryWorkload {
    rows: Vec<Vec<f64>>,
    gamma: Vec<f64>,
}

impl QueryWorkload {
    pub fn new(rows: Vec<Vec<f64>>, gamma: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Domain("workload needs at least one query".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("ragged workload rows".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite workload entry".into()));
        }
        if gamma.len() != rows.len() || gamma.iter().any(|&g| g <= 0.0 || !g.is_finite()) {
            return Err(Error::Domain(
                "gamma must be positive, one weight per query".into(),
            ));
        }
        Ok(Self { rows, gamma })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn with_gamma(mut self, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != self.rows.len() || gamma.iter().any(|&g| g <= 0.0 || !g.is_finite()) {
            return Err(Error::Domain("invalid gamma".into()));
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Number of queries m.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Number of days n.
    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    /// Exact answers Q x.
    pub fn answer(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|q| q.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Index of the last day with a nonzero coefficient in row `j`, i.e.
    /// the day on which this query's support closes.
    pub fn last_supported_day(&self, j: usize) -> usize {
        self.rows[j]
            .iter()
            .rposition(|&v| v != 0.0)
            .unwrap_or(0)
    }

    /// If row `j` is an interval of ones over days [a, b], return (a, b).
    pub fn interval_of(&self, j: usize) -> Option<(usize, usize)> {
        let row = &self.rows[j];
        let a = row.iter().position(|&v| v != 0.0)?;
        let b = row.iter().rposition(|&v| v != 0.0)?;
        if row[a..=b].iter().all(|&v| v == 1.0) && row[..a].iter().all(|&v| v == 0.0) {
            Some((a, b))
        } else {
            None
        }
    }

    /// Row-major CSV for inspection.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Lower-triangular all-ones workload: row i sums days 0..=i.
pub fn prefix_sum_workload(n: usize) -> Result<QueryWorkload> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let rows = (0..n)
        .map(|i| (0..n).map(|t| if t <= i { 1.0 } else { 0.0 }).collect())
        .collect();
    QueryWorkload::new(rows, vec![1.0; n])
}

/// Sliding-window workload: row i sums days max(0, i-K+1)..=i.
pub fn sliding_window_workload(n: usize, k: usize) -> Result<QueryWorkload> {
    if n == 0 || k == 0 {
        return Err(Error::Domain("n and K must be >= 1".into()));
    }
    let rows = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(k - 1);
            (0..n)
                .map(|t| if t >= lo && t <= i { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    QueryWorkload::new(rows, vec![1.0; n])
}

/// Variance of a single query under independent per-day Gaussian noise:
/// sum_i q[i]^2 sigma_i^2.
pub fn query_variance(q: &[f64], sigma: &[f64]) -> f64 {
    q.iter().zip(sigma).map(|(&qi, &si)| qi * qi * si * si).sum()
}

/// Per-query noisy estimates paired with exact answers.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerSet {
    pub estimates: Vec<f64>,
    pub truth: Vec<f64>,
}

impl AnswerSet {
    pub fn new(estimates: Vec<f64>, truth: Vec<f64>) -> Result<Self> {
        if estimates.len() != truth.len() {
            return Err(Error::Domain("estimate/truth length mismatch".into()));
        }
        Ok(Self { estimates, truth })
    }
}

/// Weighted root mean square error, normalized by the total squared weight:
/// sqrt( sum_j gamma_j^2 (est_j - truth_j)^2 / sum_j gamma_j^2 ).
pub fn wrmse(ans: &AnswerSet, gamma: &[f64]) -> f64 {
    let num: f64 = ans
        .estimates
        .iter()
        .zip(&ans.truth)
        .zip(gamma)
        .map(|((e, t), g)| g * g * (e - t) * (e - t))
        .sum();
    let den: f64 = gamma.iter().map(|g| g * g).sum();
    (num / den).sqrt()
}

/// Maximum per-query empirical mean squared error across trials.
pub fn max_mse(trials: &[AnswerSet]) -> f64 {
    if trials.is_empty() {
        return 0.0;
    }
    let m = trials[0].estimates.len();
    (0..m)
        .map(|j| {
            trials
                .iter()
                .map(|t| (t.estimates[j] - t.truth[j]).powi(2))
                .sum::<f64>()
                / trials.len() as f64
        })
        .fold(0.0, f64::max)
}
