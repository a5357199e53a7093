//! Batch experiment runner: generate synthetic event streams, score
//! mechanisms on the two scenario workloads, and sweep budget or horizon
//! values into long-format CSV for plotting.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adsbpc::harness::{
    results_csv, run_experiment, thread_pool, HarnessConfig, Method, ResultRow, Scenario,
};
use adsbpc::synth::{generate, scale_down, to_event_csvs, Family, SynthSpec};
use adsbpc::Result;

#[derive(Parser)]
#[command(name = "adsbpc", about = "Streaming ad-measurement experiments under user-level privacy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as raw-event CSV files.
    Generate(GenerateArgs),
    /// Score one method (or all) on a scenario over seeded trials.
    Run(RunArgs),
    /// Sweep the budget or the horizon and emit one row per trial.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; missing keys fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset family: zipf | normal | uniform | criteo_like | facebook_like.
    #[arg(long, default_value = "zipf")]
    dataset: String,
    /// Divide the full-scale user and publisher counts by this factor.
    #[arg(long, default_value_t = 100)]
    scale_factor: u64,
    /// Base seed; trial t uses seed ^ t for noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of days in the stream.
    #[arg(long, default_value_t = 31)]
    days: usize,
    /// Output directory for impressions.csv and conversions.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Method to score, or "all".
    #[arg(long, default_value = "all")]
    method: String,
    /// Scenario: prefix_wrmse | window_maxvar.
    #[arg(long, default_value = "prefix_wrmse")]
    scenario: String,
    #[arg(long, default_value_t = 10)]
    trials: u64,
    /// Number of days in the stream.
    #[arg(long, default_value_t = 31)]
    days: usize,
    /// Results CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sweep axis: rho | n.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long)]
    values: String,
    #[arg(long, default_value = "all")]
    method: String,
    #[arg(long, default_value = "prefix_wrmse")]
    scenario: String,
    #[arg(long, default_value_t = 10)]
    trials: u64,
    #[arg(long, default_value_t = 31)]
    days: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>, seed: u64) -> Result<HarnessConfig> {
    let mut cfg = match path {
        Some(p) => HarnessConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => HarnessConfig::default(),
    };
    cfg.seed = seed;
    Ok(cfg)
}

fn dataset_spec(common: &CommonArgs, days: usize) -> Result<SynthSpec> {
    let family = Family::parse(&common.dataset)?;
    let full = SynthSpec::full_scale(family, common.seed);
    let mut spec = scale_down(&full, common.scale_factor)?;
    spec.n_days = days;
    Ok(spec)
}

fn methods_from_flag(flag: &str) -> Result<Vec<Method>> {
    if flag == "all" {
        Ok(Method::ALL.to_vec())
    } else {
        Ok(vec![Method::parse(flag)?])
    }
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, content).map_err(Into::into),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let spec = dataset_spec(&args.common, args.days)?;
    let stream = generate(&spec)?;
    let (impressions, conversions) = to_event_csvs(&stream, 86_400);
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("impressions.csv"), impressions)?;
    std::fs::write(args.out.join("conversions.csv"), conversions)?;
    eprintln!(
        "wrote {} conversions over {} days to {}",
        stream.iter().map(|d| d.len()).sum::<usize>(),
        spec.n_days,
        args.out.display()
    );
    Ok(())
}

fn score(
    methods: &[Method],
    scenario: Scenario,
    cfg: &HarnessConfig,
    spec: &SynthSpec,
    trials: u64,
    rows: &mut Vec<ResultRow>,
) -> Result<()> {
    if trials == 0 {
        return Err(adsbpc::Error::Config("need at least one trial".into()));
    }
    let mut cfg = cfg.clone();
    if cfg.population.is_none() {
        cfg.population = Some(spec.n_users);
    }
    let cfg = &cfg;
    let days = generate(spec)?;
    let gs = spec.family.cap();
    for &method in methods {
        let res = run_experiment(
            method,
            scenario,
            &days,
            spec.n_publishers as usize,
            gs,
            cfg,
            trials,
            cfg.seed,
        )?;
        for (t, &error) in res.errors.iter().enumerate() {
            rows.push(ResultRow {
                method: method.as_str().into(),
                dataset: spec.family.as_str().into(),
                scenario: scenario.as_str().into(),
                rho: cfg.rho_total,
                n: spec.n_days,
                trial: t as u64,
                error,
            });
        }
        eprintln!(
            "{} {} {}: mean error {:.6}",
            method.as_str(),
            spec.family.as_str(),
            scenario.as_str(),
            res.mean
        );
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = load_config(&args.common.config, args.common.seed)?;
    let scenario = Scenario::parse(&args.scenario)?;
    let methods = methods_from_flag(&args.method)?;
    let spec = dataset_spec(&args.common, args.days)?;
    let mut rows = Vec::new();
    score(&methods, scenario, &cfg, &spec, args.trials, &mut rows)?;
    write_or_print(&args.out, &results_csv(&rows))
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let base = load_config(&args.common.config, args.common.seed)?;
    let scenario = Scenario::parse(&args.scenario)?;
    let methods = methods_from_flag(&args.method)?;
    let values: Vec<&str> = args.values.split(',').filter(|v| !v.is_empty()).collect();
    if values.is_empty() {
        return Err(adsbpc::Error::Config("empty sweep value list".into()));
    }
    let mut rows = Vec::new();
    match args.axis.as_str() {
        "rho" => {
            for v in values {
                let rho: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| adsbpc::Error::Config(format!("bad rho value {v:?}")))?;
                let cfg = HarnessConfig { rho_total: rho, ..base.clone() };
                let spec = dataset_spec(&args.common, args.days)?;
                score(&methods, scenario, &cfg, &spec, args.trials, &mut rows)?;
            }
        }
        "n" => {
            for v in values {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| adsbpc::Error::Config(format!("bad horizon value {v:?}")))?;
                let spec = dataset_spec(&args.common, n)?;
                score(&methods, scenario, &base, &spec, args.trials, &mut rows)?;
            }
        }
        other => {
            return Err(adsbpc::Error::Config(format!("unknown sweep axis {other:?}")));
        }
    }
    write_or_print(&args.out, &results_csv(&rows))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = thread_pool();
    let result = pool.install(|| match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(adsbpc::Error::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
