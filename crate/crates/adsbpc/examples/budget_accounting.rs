//! Zero-concentrated differential privacy bookkeeping: converting
//! between budget flavours, group privacy, and Gaussian calibration.

use adsbpc::accounting::{
    gaussian_sigma, group_privacy, mechanism_budget, puredp_to_zcdp, zcdp_budget_for_epsilon,
    zcdp_to_dp, BoundedScales, Budget,
};

fn main() -> adsbpc::Result<()> {
    let rho = Budget::new(1.0)?;
    for eps in [0.5, 1.0, 2.0, 4.0] {
        println!("rho=1 gives delta={:.3e} at epsilon={eps}", zcdp_to_dp(rho, eps)?);
    }

    let eps = 2.0;
    let converted = puredp_to_zcdp(eps)?;
    println!("pure epsilon={eps} converts to rho={:.6}", converted.rho());
    let back = zcdp_budget_for_epsilon(converted)?;
    println!("inverting that budget recovers epsilon={back:.6}");

    let single = Budget::new(0.05)?;
    let group = group_privacy(single, 10)?;
    println!("rho={} for one record becomes rho={} for 10 records", single.rho(), group.rho());

    // A two-day release with per-day caps r and noise scales sigma.
    let bs = BoundedScales::new(vec![2.0, 3.0], vec![4.0, 6.0])?;
    println!("realized measurement budget: rho={:.4}", mechanism_budget(&bs)?.rho());
    println!(
        "sensitivity 5 under rho=0.5 needs sigma={:.4}",
        gaussian_sigma(5.0, Budget::new(0.5)?)?
    );
    Ok(())
}
