//! Exponential-mechanism estimation of a per-day user-contribution bound.

use crate::accounting::{puredp_to_zcdp, Budget};
use crate::error::{Error, Result};
use crate::noise::NoiseGen;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileParams {
    /// Target quantile in (0, 1).
    pub p: f64,
    /// Pure-DP budget of one call.
    pub epsilon: f64,
    /// Cap on contribution counts; the returned bound never exceeds it.
    pub lambda_cap: u64,
}

impl QuantileParams {
    pub fn new(p: f64, epsilon: f64, lambda_cap: u64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile p must be in (0,1), got {p}")));
        }
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if lambda_cap == 0 {
            return Err(Error::Domain("lambda_cap must be at least 1".into()));
        }
        Ok(QuantileParams { p, epsilon, lambda_cap })
    }
}

/// Differentially private quantile of a multiset of per-user counts.
///
/// Counts are sorted ascending and clipped to the cap; with sentinels
/// c_0 = 0 and c_{k+1} = cap, interval `i` is sampled with probability
/// proportional to `(c_{i+1} - c_i) * exp(-eps * |i - p*k| / 2)`, then the
/// bound is drawn uniformly inside the chosen interval and rounded up
/// (never below 1, so clipping always keeps one conversion per user).
pub fn private_quantile(counts: &[u64], params: &QuantileParams, rng: &mut NoiseGen) -> Result<u64> {
    if counts.is_empty() {
        return Err(Error::Domain(
            "private_quantile requires a non-empty count multiset".into(),
        ));
    }
    let cap = params.lambda_cap;
    let mut c: Vec<u64> = counts.iter().map(|&v| v.min(cap)).collect();
    c.sort_unstable();
    let k = c.len();
    // Sentinels: c[0] = 0, c[k+1] = cap.
    let mut edges = Vec::with_capacity(k + 2);
    edges.push(0u64);
    edges.extend_from_slice(&c);
    edges.push(cap);

    let target = params.p * k as f64;
    // Log-weights, shifted by the max for numerical stability.
    let mut logw = Vec::with_capacity(k + 1);
    let mut max_logw = f64::NEG_INFINITY;
    for i in 0..=k {
        let len = (edges[i + 1] - edges[i]) as f64;
        let lw = if len > 0.0 {
            len.ln() - params.epsilon * (i as f64 - target).abs() / 2.0
        } else {
            f64::NEG_INFINITY
        };
        if lw > max_logw {
            max_logw = lw;
        }
        logw.push(lw);
    }
    let weights: Vec<f64> = logw.iter().map(|&lw| (lw - max_logw).exp()).collect();
    let total: f64 = weights.iter().sum();

    // Inverse-CDF sample of the interval index.
    let u = rng.uniform01() * total;
    let mut acc = 0.0;
    let mut idx = weights.len() - 1;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            idx = i;
            break;
        }
    }
    let lo = edges[idx] as f64;
    let hi = edges[idx + 1] as f64;
    let sample = lo + rng.uniform01() * (hi - lo);
    Ok((sample.ceil() as u64).max(1))
}

/// zCDP cost of one quantile call: `min(eps^2 / 8, eps * tanh(eps / 2))`.
pub fn quantile_budget(epsilon: f64) -> Result<Budget> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let bounded_range = epsilon * epsilon / 8.0;
    let pure = puredp_to_zcdp(epsilon)?.rho();
    Budget::new(bounded_range.min(pure))
}

/// Inverse of [`quantile_budget`]: the pure-DP epsilon whose quantile call
/// costs exactly `rho`, found by monotone bisection.
pub fn epsilon_for_quantile_budget(rho: Budget) -> Result<f64> {
    let target = rho.rho();
    let f = |eps: f64| (eps * eps / 8.0).min(eps * (eps / 2.0).tanh());
    let mut hi = 1.0;
    while f(hi) < target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Domain(format!("budget {target} too large")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
