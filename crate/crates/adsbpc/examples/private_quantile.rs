//! Differentially private order statistics over per-user daily
//! contribution counts.

use adsbpc::noise::NoiseGen;
use adsbpc::quantile::{epsilon_for_quantile_budget, private_quantile, QuantileParams};

fn main() -> adsbpc::Result<()> {
    // 1000 users with counts drawn uniformly from 1..=100.
    let mut rng = NoiseGen::seeded(7);
    let mut counts: Vec<u64> = (0..1000).map(|_| 1 + rng.uniform_usize(100) as u64).collect();
    counts.sort_unstable();
    println!("true 99th percentile: {}", counts[989]);

    for eps in [0.5, 2.0, 10.0] {
        let params = QuantileParams::new(0.99, eps, 100)?;
        let estimates: Vec<u64> = (0..5)
            .map(|_| private_quantile(&counts, &params, &mut rng))
            .collect::<adsbpc::Result<_>>()?;
        println!("epsilon={eps}: five private draws {estimates:?}");
    }

    let eps = epsilon_for_quantile_budget(adsbpc::accounting::Budget::new(0.15 / 7.0)?)?;
    println!("a per-day budget share of 0.15/7 corresponds to epsilon={eps:.4}");
    Ok(())
}
