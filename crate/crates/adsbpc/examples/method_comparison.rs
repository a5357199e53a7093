//! Score all six release mechanisms on one synthetic stream under both
//! evaluation scenarios.

use adsbpc::harness::{run_experiment, HarnessConfig, Method, Scenario};
use adsbpc::synth::{generate, Family, SynthSpec};

fn main() -> adsbpc::Result<()> {
    let spec = SynthSpec::new(Family::Zipf, 2_000, 10, 31, 1)?;
    let days = generate(&spec)?;
    let cfg = HarnessConfig { population: Some(spec.n_users), ..HarnessConfig::default() };

    for scenario in [Scenario::PrefixWrmse, Scenario::WindowMaxvar] {
        println!("scenario {}:", scenario.as_str());
        for method in Method::ALL {
            let res = run_experiment(
                method,
                scenario,
                &days,
                spec.n_publishers as usize,
                spec.family.cap(),
                &cfg,
                5,
                99,
            )?;
            println!("  {:8} mean error {:12.4}", method.as_str(), res.mean);
        }
    }
    Ok(())
}
