//! Experiment harness: scenario workloads, per-trial error metrics, and
//! seeded multi-trial runs of every mechanism on a shared dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accounting::Budget;
use crate::baselines::{
    bin_tree, interval_answers, ipa, mmbpc, stream_mech, GlobalSensitivityConfig, StreamConfig,
};
use crate::error::{Error, Result};
use crate::mechanism::{
    aggregate_days, run_adsbpc_with_rng, AdsBpcConfig, DayData,
};
use crate::noise::NoiseGen;
use crate::scales::ScaleObjective;
use crate::svt::SvtConfig;
use crate::workload::{prefix_sum_workload, sliding_window_workload, QueryWorkload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Adsbpc,
    Ipa,
    Bin,
    Stream,
    Umm,
    Mmbpc,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Adsbpc,
        Method::Ipa,
        Method::Bin,
        Method::Stream,
        Method::Umm,
        Method::Mmbpc,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adsbpc" => Ok(Method::Adsbpc),
            "ipa" => Ok(Method::Ipa),
            "bin" => Ok(Method::Bin),
            "stream" => Ok(Method::Stream),
            "umm" => Ok(Method::Umm),
            "mmbpc" => Ok(Method::Mmbpc),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Adsbpc => "adsbpc",
            Method::Ipa => "ipa",
            Method::Bin => "bin",
            Method::Stream => "stream",
            Method::Umm => "umm",
            Method::Mmbpc => "mmbpc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Prefix sums scored by weighted RMSE, with 7x weight on the final
    /// day's query.
    PrefixWrmse,
    /// Sliding-window sums scored by the worst per-query mean squared
    /// error.
    WindowMaxvar,
}

impl Scenario {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "prefix_wrmse" => Ok(Scenario::PrefixWrmse),
            "window_maxvar" => Ok(Scenario::WindowMaxvar),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::PrefixWrmse => "prefix_wrmse",
            Scenario::WindowMaxvar => "window_maxvar",
        }
    }
}

/// Detector settings as they appear in config files (the working budget is
/// derived from the split at run time).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SvtSettings {
    pub t_up: f64,
    pub t_down: f64,
    pub s_up: f64,
    pub s_down: f64,
    pub k_max: u32,
}

impl Default for SvtSettings {
    fn default() -> Self {
        SvtSettings { t_up: 50.0, t_down: 50.0, s_up: 1.3, s_down: 0.8, k_max: 7 }
    }
}

/// JSON-serializable experiment configuration; every default matches the
/// library defaults.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct HarnessConfig {
    pub rho_total: f64,
    pub split: [f64; 3],
    pub l: usize,
    pub p: f64,
    pub lambda_cap: u64,
    /// Known total user population; zero-count users then anchor the
    /// warmup quantile (treated as public knowledge).
    pub population: Option<u64>,
    pub svt: SvtSettings,
    pub window_k: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            rho_total: 1.0,
            split: [0.7, 0.15, 0.15],
            l: 7,
            p: 0.99,
            lambda_cap: 10,
            population: None,
            svt: SvtSettings::default(),
            window_k: 7,
            seed: 0,
        }
    }
}

impl HarnessConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad config file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// Mechanism configuration for a scenario; the window scenario uses
    /// the utility-constrained initializer.
    pub fn adsbpc_config(&self, scenario: Scenario) -> Result<AdsBpcConfig> {
        let s = self.svt;
        Ok(AdsBpcConfig {
            rho_total: Budget::new(self.rho_total)?,
            split: (self.split[0], self.split[1], self.split[2]),
            l: self.l,
            p: self.p,
            lambda_cap: self.lambda_cap,
            population: self.population,
            svt: SvtConfig::new(1.0, s.k_max, s.t_up, s.t_down, s.s_up, s.s_down, self.l)?,
            objective: match scenario {
                Scenario::PrefixWrmse => ScaleObjective::WeightedVarianceSum,
                Scenario::WindowMaxvar => ScaleObjective::MinBudgetUnderVarianceCaps,
            },
            seed: self.seed,
        })
    }

    pub fn workload(&self, scenario: Scenario, n: usize) -> Result<QueryWorkload> {
        scenario_workload(scenario, n, self.window_k)
    }
}

/// The scenario workloads: prefix sums with weight 7 on the final query,
/// or unit-weight sliding windows.
pub fn scenario_workload(scenario: Scenario, n: usize, window_k: usize) -> Result<QueryWorkload> {
    match scenario {
        Scenario::PrefixWrmse => {
            let mut gamma = vec![1.0; n];
            gamma[n - 1] = 7.0;
            prefix_sum_workload(n)?.with_gamma(gamma)
        }
        Scenario::WindowMaxvar => sliding_window_workload(n, window_k.min(n)),
    }
}

/// Weighted RMSE pooled over queries and publishers, normalized by the
/// weight mass and publisher count.
pub fn wrmse_pooled(est: &[Vec<f64>], truth: &[Vec<f64>], gamma: &[f64]) -> f64 {
    let k = est[0].len();
    let mut num = 0.0;
    let mut denom = 0.0;
    for (j, &g) in gamma.iter().enumerate() {
        denom += g * g * k as f64;
        for p in 0..k {
            let e = est[j][p] - truth[j][p];
            num += g * g * e * e;
        }
    }
    (num / denom).sqrt()
}

/// Worst per-query mean squared error, averaged over publishers.
pub fn maxvar_pooled(est: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    let k = est[0].len();
    est.iter()
        .zip(truth)
        .map(|(er, tr)| {
            er.iter().zip(tr).map(|(&e, &t)| (e - t) * (e - t)).sum::<f64>() / k as f64
        })
        .fold(0.0f64, f64::max)
}

/// One trial of one method: per-query, per-publisher estimates.
pub fn run_trial(
    method: Method,
    days: &[DayData],
    n_publishers: usize,
    workload: &QueryWorkload,
    config: &AdsBpcConfig,
    gs: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = NoiseGen::seeded(seed);
    let gs_cfg = GlobalSensitivityConfig::new(gs, config.rho_total)?;
    match method {
        Method::Adsbpc => {
            let releases = run_adsbpc_with_rng(days, n_publishers, workload, config, &mut rng)?;
            let mut answers = vec![Vec::new(); workload.m()];
            for rel in &releases {
                for ans in &rel.query_answers {
                    answers[ans.query] = ans.values.clone();
                }
            }
            Ok(answers)
        }
        Method::Ipa => {
            let x = aggregate_days(days, n_publishers)?;
            interval_answers(workload, &ipa(&x, &gs_cfg, &mut rng))
        }
        Method::Bin => {
            let x = aggregate_days(days, n_publishers)?;
            interval_answers(workload, &bin_tree(&x, &gs_cfg, &mut rng))
        }
        Method::Stream => {
            let sc = StreamConfig::defaults(gs_cfg);
            interval_answers(workload, &stream_mech(days, n_publishers, &sc, &mut rng)?)
        }
        Method::Umm => {
            let x = aggregate_days(days, n_publishers)?;
            interval_answers(workload, &crate::baselines::umm(&x, &gs_cfg, &mut rng))
        }
        Method::Mmbpc => {
            interval_answers(workload, &mmbpc(days, n_publishers, config, &mut rng)?)
        }
    }
}

/// Exact per-query, per-publisher workload answers.
pub fn exact_answers(
    days: &[DayData],
    n_publishers: usize,
    workload: &QueryWorkload,
) -> Result<Vec<Vec<f64>>> {
    let x = aggregate_days(days, n_publishers)?;
    let mut out = Vec::with_capacity(workload.m());
    for row in workload.rows() {
        let vals: Vec<f64> = (0..n_publishers)
            .map(|p| row.iter().zip(&x).map(|(&w, day)| w * day[p]).sum())
            .collect();
        out.push(vals);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Per-trial errors, ordered by trial index.
    pub errors: Vec<f64>,
    pub mean: f64,
}

/// Run `trials` seeded repetitions of one method on a shared dataset.
/// Trial t uses noise seed `base_seed ^ t`; trials run in parallel on the
/// current thread pool and results are ordered by trial index.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    method: Method,
    scenario: Scenario,
    days: &[DayData],
    n_publishers: usize,
    gs: u64,
    cfg: &HarnessConfig,
    trials: u64,
    base_seed: u64,
) -> Result<ExperimentResult> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let workload = cfg.workload(scenario, days.len())?;
    let config = cfg.adsbpc_config(scenario)?;
    let truth = exact_answers(days, n_publishers, &workload)?;
    let errors: Result<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut config = config.clone();
            config.seed = base_seed ^ t;
            let est = run_trial(
                method,
                days,
                n_publishers,
                &workload,
                &config,
                gs,
                base_seed ^ t,
            )?;
            Ok(match scenario {
                Scenario::PrefixWrmse => wrmse_pooled(&est, &truth, workload.gamma()),
                Scenario::WindowMaxvar => maxvar_pooled(&est, &truth),
            })
        })
        .collect();
    let errors = errors?;
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Ok(ExperimentResult { errors, mean })
}

/// One line of the long-format results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub dataset: String,
    pub scenario: String,
    pub rho: f64,
    pub n: usize,
    pub trial: u64,
    pub error: f64,
}

pub const RESULTS_HEADER: &str = "method,dataset,scenario,rho,n,trial,error";

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method, r.dataset, r.scenario, r.rho, r.n, r.trial, r.error
        ));
    }
    out
}

/// Build a rayon thread pool sized by the ADSDP_THREADS environment
/// variable (all cores when unset or unparsable).
pub fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("ADSDP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().expect("thread pool construction cannot fail")
}
