//! Calibrating per-day noise scales for a query workload: minimize the
//! weighted variance under a fixed budget, or minimize the budget under
//! per-query variance caps.

use adsbpc::accounting::Budget;
use adsbpc::scales::{init_privacy_constrained, init_utility_constrained};
use adsbpc::workload::{prefix_sum_workload, sliding_window_workload};

fn main() -> adsbpc::Result<()> {
    let n = 8;
    let q = prefix_sum_workload(n)?;
    let mut gamma = vec![1.0; n];
    gamma[n - 1] = 7.0; // emphasize the full-horizon total
    let r_bar = vec![1.0; n];

    let plan = init_privacy_constrained(&q, &gamma, &r_bar, Budget::new(0.7)?)?;
    println!("budget-constrained plan (rho1=0.7):");
    for (i, s) in plan.sigma_bar.iter().enumerate() {
        println!("  day {i}: sigma_bar = {s:.4}");
    }
    println!("  weighted variance sum = {:.4}", plan.objective_value);

    let w = sliding_window_workload(n, 3)?;
    let caps = vec![4.0; w.m()];
    let plan2 = init_utility_constrained(&w, &caps, &r_bar)?;
    println!("\ncap-constrained plan (each 3-day window variance <= 4):");
    println!("  minimal budget rho1 = {:.4}", plan2.rho1);
    println!("{}", plan2.to_csv());
    Ok(())
}
