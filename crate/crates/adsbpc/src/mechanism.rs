//! The online release mechanism: per-day contribution bounds from the
//! quantile/SVT pipeline, clipping, noise-scale rescaling, matrix-Gaussian
//! noise, and streaming query answers under a three-way budget split.

use std::collections::BTreeMap;

use crate::accounting::{
    mechanism_budget, zcdp_budget_for_epsilon, BoundedScales, Budget,
};
use crate::attribution::ContributionHistogram;
use crate::error::{Error, Result};
use crate::noise::NoiseGen;
use crate::quantile::{epsilon_for_quantile_budget, private_quantile, QuantileParams};
use crate::scales::{
    init_privacy_constrained, init_utility_constrained, rescale, ScaleObjective, ScalePlan,
};
use crate::svt::{update_bound_svt, SvtConfig, SvtState};
use crate::workload::QueryWorkload;

/// One attributed conversion: a user credited to a publisher. Day placement
/// comes from the position in the per-day stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conversion {
    pub user: u32,
    pub publisher: u32,
}

/// All conversions of one day.
pub type DayData = Vec<Conversion>;

#[derive(Debug, Clone)]
pub struct AdsBpcConfig {
    pub rho_total: Budget,
    /// Fractions of the total budget spent on (measurement noise,
    /// quantile warmup, SVT tracking); must sum to 1.
    pub split: (f64, f64, f64),
    /// Warmup days estimated by the private quantile.
    pub l: usize,
    /// Quantile percentage for the warmup bound.
    pub p: f64,
    /// Count cap inside the quantile mechanism.
    pub lambda_cap: u64,
    /// Known total user population. When set, users with no conversions
    /// on a day enter the warmup quantile as zero counts, which anchors
    /// the percentile to the full user base instead of only that day's
    /// active users. The population is treated as public knowledge.
    pub population: Option<u64>,
    /// Detector tuning; its `epsilon` field is ignored and replaced by the
    /// value implied by the SVT budget share.
    pub svt: SvtConfig,
    /// Which calibration problem initializes the noise scales. The
    /// utility-constrained variant uses unit per-query variance caps and
    /// is rescaled so the measurement share of the budget is unchanged.
    pub objective: ScaleObjective,
    pub seed: u64,
}

impl AdsBpcConfig {
    /// Library defaults: split (0.7, 0.15, 0.15), l = 7 warmup days,
    /// p = 0.99, count cap 10, detector thresholds 50 with scales
    /// 1.3 / 0.8 and at most 7 reports each.
    pub fn defaults(rho_total: Budget, seed: u64) -> Result<Self> {
        Ok(AdsBpcConfig {
            rho_total,
            split: (0.7, 0.15, 0.15),
            l: 7,
            p: 0.99,
            lambda_cap: 10,
            population: None,
            svt: SvtConfig::defaults(1.0)?,
            objective: ScaleObjective::WeightedVarianceSum,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.split;
        if !(a > 0.0 && b > 0.0 && c > 0.0) {
            return Err(Error::Config("budget split fractions must be positive".into()));
        }
        if (a + b + c - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "budget split fractions must sum to 1, got {}",
                a + b + c
            )));
        }
        if self.l == 0 {
            return Err(Error::Config("warmup length l must be at least 1".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("quantile p must be in (0,1), got {}", self.p)));
        }
        if self.lambda_cap == 0 {
            return Err(Error::Config("lambda_cap must be at least 1".into()));
        }
        Ok(())
    }

    /// Measurement-noise share of the budget.
    pub fn rho1(&self) -> f64 {
        self.split.0 * self.rho_total.rho()
    }

    /// Per-warmup-day quantile share.
    pub fn rho2_per_day(&self) -> f64 {
        self.split.1 * self.rho_total.rho() / self.l as f64
    }

    /// Detector-stream share.
    pub fn rho3(&self) -> f64 {
        self.split.2 * self.rho_total.rho()
    }
}

/// One answered workload row: the per-publisher estimates of query `query`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAnswer {
    pub query: usize,
    pub values: Vec<f64>,
}

/// Everything released on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyRelease {
    pub day: usize,
    /// Bound released by the estimation pipeline (always >= 1).
    pub bound: f64,
    /// Integer clipping limit actually applied: max(1, floor(bound)).
    /// Whole conversions are kept, so a fractional bound admits only its
    /// integer part; the noise scale is calibrated to the same limit.
    pub clip_bound: u64,
    /// Noise scale after rescaling to the clip bound.
    pub sigma: f64,
    /// Per-publisher noisy aggregates for this day.
    pub noisy_row: Vec<f64>,
    /// Workload rows whose support closed on this day.
    pub query_answers: Vec<QueryAnswer>,
}

/// Exact per-day per-publisher aggregates (row = day, column = publisher).
pub fn aggregate_days(days: &[DayData], n_publishers: usize) -> Result<Vec<Vec<f64>>> {
    let mut x = vec![vec![0.0; n_publishers]; days.len()];
    for (i, day) in days.iter().enumerate() {
        for conv in day {
            let p = conv.publisher as usize;
            if p >= n_publishers {
                return Err(Error::Range(format!(
                    "publisher {p} out of range (have {n_publishers})"
                )));
            }
            x[i][p] += 1.0;
        }
    }
    Ok(x)
}

/// Worst-case L2 change of the scale-normalized release across datasets in
/// which one user moves up to `r_i` conversions per day, in any publisher
/// split: sqrt(sum_i r_i^2 / sigma_i^2). The publisher count drops out.
pub fn sensitivity_multi(bs: &BoundedScales) -> f64 {
    bs.r()
        .iter()
        .zip(bs.sigma())
        .map(|(&r, &s)| (r / s) * (r / s))
        .sum::<f64>()
        .sqrt()
}

/// Per-user counts fed to the warmup quantile: the day's active users,
/// padded with zero counts for the rest of a known population.
fn quantile_input(counts: &BTreeMap<String, u64>, population: Option<u64>) -> Vec<u64> {
    let mut vals: Vec<u64> = counts.values().copied().collect();
    if let Some(total) = population {
        let zeros = (total as usize).saturating_sub(vals.len());
        vals.resize(vals.len() + zeros, 0);
    }
    vals
}

fn day_counts(day: &DayData) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for conv in day {
        *counts.entry(conv.user.to_string()).or_insert(0u64) += 1;
    }
    counts
}

/// Keep at most `limit` conversions per user, in stream order, and
/// aggregate the survivors per publisher.
fn clip_and_aggregate(day: &DayData, limit: u64, n_publishers: usize) -> Result<Vec<f64>> {
    let mut kept: BTreeMap<u32, u64> = BTreeMap::new();
    let mut row = vec![0.0; n_publishers];
    for conv in day {
        let p = conv.publisher as usize;
        if p >= n_publishers {
            return Err(Error::Range(format!(
                "publisher {p} out of range (have {n_publishers})"
            )));
        }
        let c = kept.entry(conv.user).or_insert(0);
        if *c < limit {
            *c += 1;
            row[p] += 1.0;
        }
    }
    Ok(row)
}

struct Runner<'a> {
    days: &'a [DayData],
    n_publishers: usize,
    workload: &'a QueryWorkload,
    config: &'a AdsBpcConfig,
    plan: ScalePlan,
}

impl<'a> Runner<'a> {
    fn new(
        days: &'a [DayData],
        n_publishers: usize,
        workload: &'a QueryWorkload,
        config: &'a AdsBpcConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n = days.len();
        if workload.n() != n {
            return Err(Error::Config(format!(
                "workload covers {} days but the stream has {n}",
                workload.n()
            )));
        }
        if n_publishers == 0 {
            return Err(Error::Config("need at least one publisher".into()));
        }
        let rho1 = Budget::new(config.rho1())?;
        let r_bar = vec![1.0; n];
        let plan = match config.objective {
            ScaleObjective::WeightedVarianceSum => {
                init_privacy_constrained(workload, workload.gamma(), &r_bar, rho1)?
            }
            ScaleObjective::MinBudgetUnderVarianceCaps => {
                init_utility_constrained(workload, &vec![1.0; workload.m()], &r_bar)?
                    .rescaled_to_budget(rho1)?
            }
        };
        Ok(Runner { days, n_publishers, workload, config, plan })
    }

    /// Release day `i` given its bound, then answer every workload row
    /// whose support closes at `i`.
    fn release_day(
        &self,
        i: usize,
        bound: f64,
        noisy_rows: &mut Vec<Vec<f64>>,
        rng: &mut NoiseGen,
    ) -> Result<DailyRelease> {
        let bound = bound.max(1.0);
        let clip_bound = (bound.floor() as u64).max(1);
        let sigma = rescale(self.plan.sigma_bar[i], 1.0, clip_bound as f64);
        let mut row = clip_and_aggregate(&self.days[i], clip_bound, self.n_publishers)?;
        for v in row.iter_mut() {
            *v += rng.gaussian(sigma);
        }
        noisy_rows.push(row.clone());

        let mut query_answers = Vec::new();
        for j in 0..self.workload.m() {
            if self.workload.last_supported_day(j) == i {
                let qrow = &self.workload.rows()[j];
                let values = (0..self.n_publishers)
                    .map(|p| {
                        qrow.iter()
                            .zip(noisy_rows.iter())
                            .map(|(&w, day_row)| w * day_row[p])
                            .sum()
                    })
                    .collect();
                query_answers.push(QueryAnswer { query: j, values });
            }
        }
        Ok(DailyRelease { day: i, bound, clip_bound, sigma, noisy_row: noisy_rows[i].clone(), query_answers })
    }

    fn run(&self, rng: &mut NoiseGen) -> Result<Vec<DailyRelease>> {
        let q_eps = epsilon_for_quantile_budget(Budget::new(self.config.rho2_per_day())?)?;
        let q_params = QuantileParams::new(self.config.p, q_eps, self.config.lambda_cap)?;
        let svt_eps = zcdp_budget_for_epsilon(Budget::new(self.config.rho3())?)?;
        let svt_cfg = SvtConfig { epsilon: svt_eps, ..self.config.svt };
        let mut state = SvtState::new(&svt_cfg, rng);

        let mut releases = Vec::with_capacity(self.days.len());
        let mut noisy_rows: Vec<Vec<f64>> = Vec::with_capacity(self.days.len());
        let mut prev_bound = 1.0f64;
        for i in 0..self.days.len() {
            let counts = day_counts(&self.days[i]);
            let bound = if i < self.config.l {
                let b = if counts.is_empty() {
                    prev_bound
                } else {
                    let vals = quantile_input(&counts, self.config.population);
                    private_quantile(&vals, &q_params, rng)? as f64
                };
                state.bound_list.push(b);
                b
            } else {
                let hist = ContributionHistogram { day: i, counts };
                update_bound_svt(&hist, &svt_cfg, &mut state, rng)?
            };
            prev_bound = bound;
            releases.push(self.release_day(i, bound, &mut noisy_rows, rng)?);
        }
        Ok(releases)
    }

    fn run_with_fixed_bounds(&self, bounds: &[f64], rng: &mut NoiseGen) -> Result<Vec<DailyRelease>> {
        if bounds.len() != self.days.len() {
            return Err(Error::Config("one bound per day required".into()));
        }
        let mut releases = Vec::with_capacity(self.days.len());
        let mut noisy_rows = Vec::with_capacity(self.days.len());
        for (i, &b) in bounds.iter().enumerate() {
            releases.push(self.release_day(i, b, &mut noisy_rows, rng)?);
        }
        Ok(releases)
    }
}

/// Run only the bound-estimation pipeline (quantile warmup, then detector
/// updates) and return the per-day bounds, clamped to at least 1. Consumes
/// the quantile and detector budget shares but no measurement noise.
pub fn estimate_bounds(
    days: &[DayData],
    config: &AdsBpcConfig,
    rng: &mut NoiseGen,
) -> Result<Vec<f64>> {
    config.validate()?;
    let q_eps = epsilon_for_quantile_budget(Budget::new(config.rho2_per_day())?)?;
    let q_params = QuantileParams::new(config.p, q_eps, config.lambda_cap)?;
    let svt_eps = zcdp_budget_for_epsilon(Budget::new(config.rho3())?)?;
    let svt_cfg = SvtConfig { epsilon: svt_eps, ..config.svt };
    let mut state = SvtState::new(&svt_cfg, rng);
    let mut bounds = Vec::with_capacity(days.len());
    let mut prev_bound = 1.0f64;
    for (i, day) in days.iter().enumerate() {
        let counts = day_counts(day);
        let bound = if i < config.l {
            let b = if counts.is_empty() {
                prev_bound
            } else {
                let vals = quantile_input(&counts, config.population);
                private_quantile(&vals, &q_params, rng)? as f64
            };
            state.bound_list.push(b);
            b
        } else {
            let hist = ContributionHistogram { day: i, counts };
            update_bound_svt(&hist, &svt_cfg, &mut state, rng)?
        };
        prev_bound = bound;
        bounds.push(bound.max(1.0));
    }
    Ok(bounds)
}

/// Run the full online mechanism over a per-day stream.
pub fn run_adsbpc(
    days: &[DayData],
    n_publishers: usize,
    workload: &QueryWorkload,
    config: &AdsBpcConfig,
) -> Result<Vec<DailyRelease>> {
    let mut rng = NoiseGen::seeded(config.seed);
    run_adsbpc_with_rng(days, n_publishers, workload, config, &mut rng)
}

/// As [`run_adsbpc`], but with an externally managed generator (shared
/// streams across trials, or the noise-disabled test hook).
pub fn run_adsbpc_with_rng(
    days: &[DayData],
    n_publishers: usize,
    workload: &QueryWorkload,
    config: &AdsBpcConfig,
    rng: &mut NoiseGen,
) -> Result<Vec<DailyRelease>> {
    Runner::new(days, n_publishers, workload, config)?.run(rng)
}

/// Run with externally supplied per-day bounds, skipping the estimation
/// pipeline (useful for calibration studies and ablations; only the
/// measurement share of the budget is consumed).
pub fn run_adsbpc_with_fixed_bounds(
    days: &[DayData],
    n_publishers: usize,
    workload: &QueryWorkload,
    config: &AdsBpcConfig,
    bounds: &[f64],
    rng: &mut NoiseGen,
) -> Result<Vec<DailyRelease>> {
    Runner::new(days, n_publishers, workload, config)?.run_with_fixed_bounds(bounds, rng)
}

/// The realized (clip bound, noise scale) pairs of a finished run, for
/// budget audits.
pub fn realized_scales(releases: &[DailyRelease]) -> Result<BoundedScales> {
    BoundedScales::new(
        releases.iter().map(|r| r.clip_bound as f64).collect(),
        releases.iter().map(|r| r.sigma).collect(),
    )
}

/// Total budget of a run: measurement share (audited from the realized
/// scales) plus the quantile and detector shares.
pub fn budget_ledger(releases: &[DailyRelease], config: &AdsBpcConfig) -> Result<f64> {
    let measured = mechanism_budget(&realized_scales(releases)?)?.rho();
    Ok(measured + config.l as f64 * config.rho2_per_day() + config.rho3())
}
