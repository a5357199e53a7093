//! The full online mechanism: per-day bound estimation, clipping,
//! calibrated Gaussian noise, and streaming query answers.

use adsbpc::accounting::Budget;
use adsbpc::mechanism::{budget_ledger, run_adsbpc, AdsBpcConfig, Conversion, DayData};
use adsbpc::workload::prefix_sum_workload;

fn main() -> adsbpc::Result<()> {
    // 200 users, 3 publishers, 14 days; user u converts on day d when
    // (u + d) divides cleanly, so daily activity varies.
    let n_days = 14;
    let days: Vec<DayData> = (0..n_days)
        .map(|d| {
            (0..200u32)
                .flat_map(|u| {
                    let reps = 1 + ((u as usize + d) % 3);
                    vec![Conversion { user: u, publisher: u % 3 }; reps]
                })
                .collect()
        })
        .collect();

    let mut config = AdsBpcConfig::defaults(Budget::new(1.0)?, 42)?;
    config.population = Some(200);
    let workload = prefix_sum_workload(n_days)?;
    let releases = run_adsbpc(&days, 3, &workload, &config)?;

    for rel in &releases {
        let answered: Vec<usize> = rel.query_answers.iter().map(|a| a.query).collect();
        println!(
            "day {:2}: bound {:5.2} clip {} sigma {:7.3} answers queries {:?}",
            rel.day, rel.bound, rel.clip_bound, rel.sigma, answered
        );
    }
    println!("total privacy budget consumed: rho={:.9}", budget_ledger(&releases, &config)?);
    Ok(())
}
