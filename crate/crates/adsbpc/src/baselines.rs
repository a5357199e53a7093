//! Comparison mechanisms releasing the same workloads under user-level
//! zCDP at the same total budget. These are reconstructions from brief
//! descriptions (tree heights, factorization choice, and the stream
//! monitor's budget split are our choices); their role is relative
//! comparison, not exact replication of any external implementation.
//!
//! Every mechanism returns noisy *prefix* estimates, one row per day and
//! one column per publisher; interval queries are answered by
//! differencing via [`interval_answers`].

use crate::accounting::{zcdp_budget_for_epsilon, Budget};
use crate::error::{Error, Result};
use crate::mechanism::{aggregate_days, DayData};
use crate::noise::NoiseGen;
use crate::workload::QueryWorkload;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalSensitivityConfig {
    /// Maximum records any user holds across the whole stream.
    pub gs: u64,
    pub rho_total: Budget,
}

impl GlobalSensitivityConfig {
    pub fn new(gs: u64, rho_total: Budget) -> Result<Self> {
        if gs == 0 {
            return Err(Error::Domain("global sensitivity must be at least 1".into()));
        }
        Ok(GlobalSensitivityConfig { gs, rho_total })
    }
}

/// Answer every workload row from prefix estimates by differencing its
/// interval support.
pub fn interval_answers(q: &QueryWorkload, prefix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(q.m());
    for j in 0..q.m() {
        let (a, b) = q.interval_of(j).ok_or_else(|| {
            Error::Domain(format!("query {j} is not an interval; cannot answer from prefixes"))
        })?;
        let row: Vec<f64> = (0..prefix[b].len())
            .map(|p| prefix[b][p] - if a > 0 { prefix[a - 1][p] } else { 0.0 })
            .collect();
        out.push(row);
    }
    Ok(out)
}

fn cumsum(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut acc = row.clone();
        if i > 0 {
            for (a, b) in acc.iter_mut().zip(&out[i - 1]) {
                *a += b;
            }
        }
        out.push(acc);
    }
    out
}

/// Per-entry noise scale of the independent-noise mechanism: event-level
/// L2 sensitivity sqrt(2) under substitution, group-privacy lifted by GS.
pub fn ipa_sigma(cfg: &GlobalSensitivityConfig) -> f64 {
    cfg.gs as f64 / cfg.rho_total.rho().sqrt()
}

/// Independent Gaussian noise on every (day, publisher) aggregate.
pub fn ipa(x: &[Vec<f64>], cfg: &GlobalSensitivityConfig, rng: &mut NoiseGen) -> Vec<Vec<f64>> {
    let sigma = ipa_sigma(cfg);
    let noisy: Vec<Vec<f64>> = x
        .iter()
        .map(|row| row.iter().map(|&v| v + rng.gaussian(sigma)).collect())
        .collect();
    cumsum(&noisy)
}

/// Height of the aggregation tree over `n` days.
pub fn tree_height(n: usize) -> u32 {
    (n.max(1) as f64).log2().ceil() as u32
}

/// Maximal dyadic blocks covering days `0..end`, as `(level, index)`
/// pairs; at most `height + 1` blocks for any prefix.
pub fn dyadic_blocks(end: usize) -> Vec<(u32, usize)> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    let mut d = usize::BITS - end.leading_zeros();
    while pos < end {
        d -= 1;
        if end - pos >= (1 << d) {
            out.push((d, pos >> d));
            pos += 1 << d;
        }
    }
    out
}

/// Per-node noise scale of the binary-tree mechanism: each day sits in
/// h + 1 nodes, so the event-level sensitivity is sqrt(2 (h + 1)).
pub fn bin_sigma(n: usize, cfg: &GlobalSensitivityConfig) -> f64 {
    let h = tree_height(n) as f64;
    cfg.gs as f64 * ((h + 1.0) / cfg.rho_total.rho()).sqrt()
}

/// Noisy tree nodes: `nodes[level][index][publisher]`, drawn level by
/// level in a fixed order. `sigma_at(day)` gives the noise scale of a node
/// whose span ends at `day` (constant for the plain tree mechanism).
fn noisy_tree(
    x: &[Vec<f64>],
    sigma_at: impl Fn(usize) -> f64,
    rng: &mut NoiseGen,
) -> Vec<Vec<Vec<f64>>> {
    let n = x.len();
    let k = x[0].len();
    let h = tree_height(n);
    let size = 1usize << h;
    let mut nodes: Vec<Vec<Vec<f64>>> = Vec::with_capacity(h as usize + 1);
    for level in 0..=h {
        let span = 1usize << level;
        let count = size >> level;
        let mut row = Vec::with_capacity(count);
        for idx in 0..count {
            // Padding nodes past day n contribute pure noise (lo >= hi).
            let lo = (idx * span).min(n);
            let hi = ((idx + 1) * span).min(n).max(lo);
            let end_day = hi.saturating_sub(1).min(n.saturating_sub(1));
            let sigma = sigma_at(end_day);
            let mut vals = vec![0.0; k];
            for row in &x[lo..hi] {
                for (v, &entry) in vals.iter_mut().zip(row) {
                    *v += entry;
                }
            }
            for v in vals.iter_mut() {
                *v += rng.gaussian(sigma);
            }
            row.push(vals);
        }
        nodes.push(row);
    }
    nodes
}

fn tree_prefixes(nodes: &[Vec<Vec<f64>>], n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut acc = vec![0.0; k];
            for (level, idx) in dyadic_blocks(i + 1) {
                for p in 0..k {
                    acc[p] += nodes[level as usize][idx][p];
                }
            }
            acc
        })
        .collect()
}

/// Binary-tree mechanism: noise every node of a complete aggregation tree
/// and assemble prefixes from the canonical dyadic decomposition.
pub fn bin_tree(x: &[Vec<f64>], cfg: &GlobalSensitivityConfig, rng: &mut NoiseGen) -> Vec<Vec<f64>> {
    let sigma = bin_sigma(x.len(), cfg);
    let nodes = noisy_tree(x, |_| sigma, rng);
    tree_prefixes(&nodes, x.len(), x[0].len())
}

#[derive(Debug, Clone, Copy)]
pub struct StreamConfig {
    pub gs: GlobalSensitivityConfig,
    /// Fraction of the budget spent on releases; the rest feeds the
    /// doubling monitor.
    pub release_frac: f64,
}

impl StreamConfig {
    pub fn new(gs: GlobalSensitivityConfig, release_frac: f64) -> Result<Self> {
        if !(release_frac > 0.0 && release_frac < 1.0) {
            return Err(Error::Domain(format!(
                "release fraction must be in (0,1), got {release_frac}"
            )));
        }
        Ok(StreamConfig { gs, release_frac })
    }

    /// Library default: 85% release, 15% monitor.
    pub fn defaults(gs: GlobalSensitivityConfig) -> Self {
        StreamConfig { gs, release_frac: 0.85 }
    }
}

/// Doubling mechanism: a sparse-vector monitor watches the maximum
/// cumulative per-user contribution and doubles the working bound `tau` on
/// a positive answer; users are clipped to the current `tau` and releases
/// go through the aggregation tree with noise proportional to `tau`.
pub fn stream_mech(
    days: &[DayData],
    n_publishers: usize,
    cfg: &StreamConfig,
    rng: &mut NoiseGen,
) -> Result<Vec<Vec<f64>>> {
    let rho = cfg.gs.rho_total.rho();
    let rho_release = cfg.release_frac * rho;
    let rho_svt = rho - rho_release;
    let eps = zcdp_budget_for_epsilon(Budget::new(rho_svt)?)?;
    // Enough reports to double from 1 past GS.
    let k_max = (cfg.gs.gs as f64).log2().ceil() as u32 + 1;

    let mut tau = 1u64;
    let mut count = 0u32;
    let mut noisy_t = tau as f64 + rng.laplace(2.0 / eps);
    let mut totals: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
    let mut kept: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
    let mut clipped = vec![vec![0.0; n_publishers]; days.len()];
    let mut tau_by_day = vec![1u64; days.len()];
    for (i, day) in days.iter().enumerate() {
        for conv in day {
            *totals.entry(conv.user).or_insert(0) += 1;
        }
        let q = totals.values().copied().max().unwrap_or(0) as f64;
        while count < k_max {
            let q_noisy = q + rng.laplace(4.0 * k_max as f64 / eps);
            if q_noisy > noisy_t {
                tau *= 2;
                count += 1;
                noisy_t = tau as f64 + rng.laplace(2.0 / eps);
            } else {
                break;
            }
        }
        tau_by_day[i] = tau;
        for conv in day {
            let p = conv.publisher as usize;
            if p >= n_publishers {
                return Err(Error::Range(format!(
                    "publisher {p} out of range (have {n_publishers})"
                )));
            }
            let c = kept.entry(conv.user).or_insert(0);
            if *c < tau {
                *c += 1;
                clipped[i][p] += 1.0;
            }
        }
    }

    let h = tree_height(days.len()) as f64;
    let nodes = noisy_tree(
        &clipped,
        |day| tau_by_day[day] as f64 * ((h + 1.0) / rho_release).sqrt(),
        rng,
    );
    Ok(tree_prefixes(&nodes, days.len(), n_publishers))
}

/// Working bounds visited by the stream monitor (for deterministic
/// traces): runs only the monitor, no release.
pub fn stream_tau_trace(days: &[DayData], cfg: &StreamConfig, rng: &mut NoiseGen) -> Result<Vec<u64>> {
    let rho_svt = (1.0 - cfg.release_frac) * cfg.gs.rho_total.rho();
    let eps = zcdp_budget_for_epsilon(Budget::new(rho_svt)?)?;
    let k_max = (cfg.gs.gs as f64).log2().ceil() as u32 + 1;
    let mut tau = 1u64;
    let mut count = 0u32;
    let mut noisy_t = tau as f64 + rng.laplace(2.0 / eps);
    let mut totals: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
    let mut trace = Vec::with_capacity(days.len());
    for day in days {
        for conv in day {
            *totals.entry(conv.user).or_insert(0) += 1;
        }
        let q = totals.values().copied().max().unwrap_or(0) as f64;
        while count < k_max {
            let q_noisy = q + rng.laplace(4.0 * k_max as f64 / eps);
            if q_noisy > noisy_t {
                tau *= 2;
                count += 1;
                noisy_t = tau as f64 + rng.laplace(2.0 / eps);
            } else {
                break;
            }
        }
        trace.push(tau);
    }
    Ok(trace)
}

/// Lower-triangular square-root factor of the prefix-sum matrix:
/// entries b[i][j] = f(i - j) with f(0) = 1, f(k) = f(k-1) (2k-1)/(2k),
/// so that B * B equals the all-ones lower triangle.
pub fn sqrt_factor(n: usize) -> Vec<Vec<f64>> {
    let mut f = vec![1.0f64; n];
    for k in 1..n {
        f[k] = f[k - 1] * (2.0 * k as f64 - 1.0) / (2.0 * k as f64);
    }
    (0..n)
        .map(|i| (0..n).map(|j| if j <= i { f[i - j] } else { 0.0 }).collect())
        .collect()
}

fn matvec_cols(b: &[Vec<f64>], x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let k = x[0].len();
    let mut out = vec![vec![0.0; k]; n];
    for i in 0..n {
        for j in 0..=i {
            let w = b[i][j];
            if w != 0.0 {
                for p in 0..k {
                    out[i][p] += w * x[j][p];
                }
            }
        }
    }
    out
}

fn max_col_norm(b: &[Vec<f64>]) -> f64 {
    let n = b.len();
    (0..n)
        .map(|j| (j..n).map(|i| b[i][j] * b[i][j]).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max)
}

/// Matrix mechanism with the square-root factorization: release
/// B (B x + sigma z), an unbiased estimate of the prefix sums, with the
/// event-level max-column sensitivity lifted by GS.
pub fn umm(x: &[Vec<f64>], cfg: &GlobalSensitivityConfig, rng: &mut NoiseGen) -> Vec<Vec<f64>> {
    let n = x.len();
    let b = sqrt_factor(n);
    let delta = 2.0f64.sqrt() * max_col_norm(&b);
    let sigma = cfg.gs as f64 * delta / (2.0 * cfg.rho_total.rho()).sqrt();
    let mut encoded = matvec_cols(&b, x);
    for row in encoded.iter_mut() {
        for v in row.iter_mut() {
            *v += rng.gaussian(sigma);
        }
    }
    matvec_cols(&b, &encoded)
}

/// Matrix mechanism under per-day contribution bounds: clip each user to
/// `max(1, floor(bounds[i]))` conversions on day i and calibrate to the worst-case
/// L2 change of the encoded vector when a user shifts up to `bounds[i]`
/// conversions on every day simultaneously, which for the entrywise
/// nonnegative factor is `||B r||_2`. `rho` is the measurement share
/// only; the caller accounts for whatever budget produced the bounds.
pub fn mmbpc_with_bounds(
    days: &[DayData],
    n_publishers: usize,
    bounds: &[f64],
    rho: Budget,
    rng: &mut NoiseGen,
) -> Result<Vec<Vec<f64>>> {
    let n = days.len();
    if bounds.len() != n {
        return Err(Error::Config("one bound per day required".into()));
    }
    let clip: Vec<u64> = bounds.iter().map(|&b| (b.max(1.0).floor() as u64).max(1)).collect();
    let mut x = vec![vec![0.0; n_publishers]; n];
    for (i, day) in days.iter().enumerate() {
        let mut kept: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
        for conv in day {
            let p = conv.publisher as usize;
            if p >= n_publishers {
                return Err(Error::Range(format!(
                    "publisher {p} out of range (have {n_publishers})"
                )));
            }
            let c = kept.entry(conv.user).or_insert(0);
            if *c < clip[i] {
                *c += 1;
                x[i][p] += 1.0;
            }
        }
    }
    let b = sqrt_factor(n);
    let delta = (0..n)
        .map(|i| {
            let row_dot: f64 = (0..=i).map(|j| b[i][j] * clip[j] as f64).sum();
            row_dot * row_dot
        })
        .sum::<f64>()
        .sqrt();
    let sigma = delta / (2.0 * rho.rho()).sqrt();
    let mut encoded = matvec_cols(&b, &x);
    for row in encoded.iter_mut() {
        for v in row.iter_mut() {
            *v += rng.gaussian(sigma);
        }
    }
    Ok(matvec_cols(&b, &encoded))
}

/// Matrix mechanism with the same bound-estimation pipeline and budget
/// split as the online mechanism: quantile warmup, detector updates, then
/// a bounded matrix release at the measurement share of the budget.
pub fn mmbpc(
    days: &[DayData],
    n_publishers: usize,
    config: &crate::mechanism::AdsBpcConfig,
    rng: &mut NoiseGen,
) -> Result<Vec<Vec<f64>>> {
    let bounds = crate::mechanism::estimate_bounds(days, config, rng)?;
    mmbpc_with_bounds(days, n_publishers, &bounds, Budget::new(config.rho1())?, rng)
}

/// Exact prefix sums of a stream, the truth against which every
/// mechanism's estimates are scored.
pub fn exact_prefixes(days: &[DayData], n_publishers: usize) -> Result<Vec<Vec<f64>>> {
    Ok(cumsum(&aggregate_days(days, n_publishers)?))
}
