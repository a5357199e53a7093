//! Sparse-vector bound tracking: a pair of above-threshold detectors that
//! raise or lower the per-day contribution bound after the warmup window.

use crate::accounting::{puredp_to_zcdp, Budget};
use crate::attribution::ContributionHistogram;
use crate::error::{Error, Result};
use crate::noise::NoiseGen;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvtConfig {
    /// Total pure-DP budget of the bound-update stream (both detectors).
    pub epsilon: f64,
    /// Maximum reports per detector over the whole stream.
    pub k_max: u32,
    pub t_up: f64,
    pub t_down: f64,
    /// Multiplier applied when the bound increases; must exceed 1.
    pub s_up: f64,
    /// Multiplier applied when the bound decreases; in (0, 1).
    pub s_down: f64,
    /// Rolling-window length for the reference bound.
    pub l: usize,
}

impl SvtConfig {
    pub fn new(
        epsilon: f64,
        k_max: u32,
        t_up: f64,
        t_down: f64,
        s_up: f64,
        s_down: f64,
        l: usize,
    ) -> Result<Self> {
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        if k_max == 0 {
            return Err(Error::Domain("k_max must be at least 1".into()));
        }
        if !(t_up > 0.0 && t_down > 0.0) {
            return Err(Error::Domain("thresholds must be positive".into()));
        }
        if !(s_up > 1.0 && s_up.is_finite()) {
            return Err(Error::Domain(format!("s_up must exceed 1, got {s_up}")));
        }
        if !(s_down > 0.0 && s_down < 1.0) {
            return Err(Error::Domain(format!("s_down must be in (0,1), got {s_down}")));
        }
        if l == 0 {
            return Err(Error::Domain("window length l must be at least 1".into()));
        }
        Ok(SvtConfig { epsilon, k_max, t_up, t_down, s_up, s_down, l })
    }

    /// Library defaults: l = 7-day window, thresholds 50, scales 1.3 / 0.8,
    /// at most 7 reports per detector.
    pub fn defaults(epsilon: f64) -> Result<Self> {
        SvtConfig::new(epsilon, 7, 50.0, 50.0, 1.3, 0.8, 7)
    }
}

/// Mutable per-stream detector state.
#[derive(Debug, Clone)]
pub struct SvtState {
    pub noisy_t_up: f64,
    pub noisy_t_down: f64,
    pub count_up: u32,
    pub count_down: u32,
    /// Per-day bounds r_i, including the warmup days.
    pub bound_list: Vec<f64>,
}

impl SvtState {
    /// Fresh state with both noisy thresholds drawn up front. The down
    /// detector compares a negated query against the negated threshold.
    pub fn new(config: &SvtConfig, rng: &mut NoiseGen) -> Self {
        let eps_each = config.epsilon / 2.0;
        SvtState {
            noisy_t_up: config.t_up + rng.laplace(2.0 / eps_each),
            noisy_t_down: -config.t_down + rng.laplace(2.0 / eps_each),
            count_up: 0,
            count_down: 0,
            bound_list: Vec::new(),
        }
    }
}

/// Number of users whose contribution count strictly exceeds `tau`.
pub fn above_threshold(histogram: &ContributionHistogram, tau: f64) -> u64 {
    histogram.counts.values().filter(|&&c| c as f64 > tau).count() as u64
}

/// One above-threshold probe: perturb `q`, compare against the stored noisy
/// threshold, and refresh that threshold after a positive answer. Returns
/// `(fired, count, noisy_threshold)`; a detector that has already reported
/// `k_max` times never fires again.
pub fn check_update(
    q: f64,
    epsilon: f64,
    count: u32,
    noisy_t: f64,
    k_max: u32,
    t: f64,
    rng: &mut NoiseGen,
) -> (bool, u32, f64) {
    if count >= k_max {
        return (false, count, noisy_t);
    }
    let q_noisy = q + rng.laplace(4.0 * k_max as f64 / epsilon);
    if q_noisy > noisy_t {
        (true, count + 1, t + rng.laplace(2.0 / epsilon))
    } else {
        (false, count, noisy_t)
    }
}

/// One day of bound tracking. The reference bound is the mean of the last
/// `l` bounds; the up detector watches how many users exceed it, the down
/// detector watches how few users sit between the shrunken bound and it.
/// Exactly one bound is appended to the history per call.
pub fn update_bound_svt(
    histogram: &ContributionHistogram,
    config: &SvtConfig,
    state: &mut SvtState,
    rng: &mut NoiseGen,
) -> Result<f64> {
    if state.bound_list.len() < config.l {
        return Err(Error::Domain(format!(
            "bound history has {} entries, need at least {}",
            state.bound_list.len(),
            config.l
        )));
    }
    let tail = &state.bound_list[state.bound_list.len() - config.l..];
    let tau: f64 = tail.iter().sum::<f64>() / config.l as f64;

    let eps_each = config.epsilon / 2.0;
    let q_up = above_threshold(histogram, tau) as f64;
    let q_down = q_up - above_threshold(histogram, tau * config.s_down) as f64;

    let (is_up, count_up, noisy_t_up) = check_update(
        q_up,
        eps_each,
        state.count_up,
        state.noisy_t_up,
        config.k_max,
        config.t_up,
        rng,
    );
    state.count_up = count_up;
    state.noisy_t_up = noisy_t_up;

    let (is_down, count_down, noisy_t_down) = check_update(
        q_down,
        eps_each,
        state.count_down,
        state.noisy_t_down,
        config.k_max,
        -config.t_down,
        rng,
    );
    state.count_down = count_down;
    state.noisy_t_down = noisy_t_down;

    // Both detectors agreeing is contradictory, so the bound holds steady.
    let r = if is_up == is_down {
        tau
    } else if is_up {
        tau * config.s_up
    } else {
        tau * config.s_down
    };
    state.bound_list.push(r);
    Ok(r)
}

/// zCDP cost of the whole bound-update stream: `eps * tanh(eps / 2)`.
pub fn svt_budget(epsilon: f64) -> Result<Budget> {
    puredp_to_zcdp(epsilon)
}
