//! zCDP budget arithmetic: conversions between privacy variants, group
//! privacy, Gaussian calibration, and the mechanism budget formula.

use crate::error::{Error, Result};

/// A zCDP privacy budget. Always positive and finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    rho: f64,
}

impl Budget {
    pub fn new(rho: f64) -> Result<Self> {
        if rho <= 0.0 || !rho.is_finite() {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Per-day contribution bounds r_i with matching Gaussian scales sigma_i.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedScales {
    r: Vec<f64>,
    sigma: Vec<f64>,
}

impl BoundedScales {
    pub fn new(r: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if r.len() != sigma.len() {
            return Err(Error::Domain(format!(
                "bound and scale vectors differ in length: {} vs {}",
                r.len(),
                sigma.len()
            )));
        }
        if r.is_empty() {
            return Err(Error::Domain("empty scale vectors".into()));
        }
        for (i, (&ri, &si)) in r.iter().zip(&sigma).enumerate() {
            if ri <= 0.0 || !ri.is_finite() || si <= 0.0 || !si.is_finite() {
                return Err(Error::Domain(format!(
                    "day {i}: bounds and scales must be positive (r={ri}, sigma={si})"
                )));
            }
        }
        Ok(Self { r, sigma })
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }
}

/// Tightest (epsilon, delta)-DP point implied by rho-zCDP at a given
/// epsilon: delta = min over alpha > 1 of
/// exp((alpha-1)(alpha rho - eps)) / (alpha-1) * (1 - 1/alpha)^alpha.
pub fn zcdp_to_dp(rho: Budget, epsilon: f64) -> Result<f64> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let rho = rho.rho();
    let log_delta = |alpha: f64| -> f64 {
        (alpha - 1.0) * (alpha * rho - epsilon) - (alpha - 1.0).ln()
            + alpha * (1.0 - 1.0 / alpha).ln()
    };
    // Coarse log-spaced scan for a bracket, then golden-section refinement.
    let mut best_alpha = 2.0;
    let mut best = f64::INFINITY;
    let scan = 4000;
    for i in 0..scan {
        let t = i as f64 / (scan - 1) as f64;
        let alpha = 1.0 + 1e-6 * (1e12_f64).powf(t);
        let v = log_delta(alpha);
        if v < best {
            best = v;
            best_alpha = alpha;
        }
    }
    let mut lo = (1.0 + 1e-12_f64).max(best_alpha / 2.0);
    let mut hi = best_alpha * 2.0;
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = log_delta(x1);
    let mut f2 = log_delta(x2);
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = log_delta(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = log_delta(x2);
        }
        if (hi - lo) < 1e-13 * hi {
            break;
        }
    }
    Ok(f1.min(f2).exp().min(1.0))
}

/// Tight pure-DP to zCDP conversion: rho = eps * (e^eps - 1)/(e^eps + 1).
pub fn puredp_to_zcdp(epsilon: f64) -> Result<Budget> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    // eps * (e^eps - 1)/(e^eps + 1) = eps * tanh(eps / 2)
    Budget::new(epsilon * (epsilon / 2.0).tanh())
}

/// Inverse of [`puredp_to_zcdp`]: the unique epsilon whose tight zCDP
/// conversion equals `target_rho`, found by monotone bisection.
pub fn zcdp_budget_for_epsilon(target_rho: Budget) -> Result<f64> {
    let target = target_rho.rho();
    let f = |eps: f64| eps * (eps / 2.0).tanh();
    let mut hi = 1.0;
    while f(hi) < target {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Domain(format!("target rho {target} too large")));
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

/// Group privacy for zCDP: an event-level rho-zCDP guarantee lifts to
/// k^2 * rho for a user contributing at most k records.
pub fn group_privacy(rho_event: Budget, k: u64) -> Result<Budget> {
    if k == 0 {
        return Err(Error::Domain("group size must be >= 1".into()));
    }
    Budget::new((k * k) as f64 * rho_event.rho())
}

/// Total mechanism budget rho = (1/2) sum_i r_i^2 / sigma_i^2.
pub fn mechanism_budget(bs: &BoundedScales) -> Result<Budget> {
    let total: f64 = bs
        .r()
        .iter()
        .zip(bs.sigma())
        .map(|(&r, &s)| (r / s) * (r / s))
        .sum();
    Budget::new(0.5 * total)
}

/// Gaussian scale for L2 sensitivity `delta2` at budget `rho`:
/// sigma = delta2 / sqrt(2 rho).
pub fn gaussian_sigma(delta2: f64, rho: Budget) -> Result<f64> {
    if delta2 <= 0.0 || !delta2.is_finite() {
        return Err(Error::Domain(format!(
            "sensitivity must be positive, got {delta2}"
        )));
    }
    Ok(delta2 / (2.0 * rho.rho()).sqrt())
}
