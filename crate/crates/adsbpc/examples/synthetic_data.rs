//! Synthetic conversion streams: per-user totals drawn from one of five
//! families, spread uniformly over days and publishers, and exportable
//! as raw event CSV.

use adsbpc::synth::{expected_mean, generate, to_event_csvs, Family, SynthSpec};

fn main() -> adsbpc::Result<()> {
    for family in [Family::Zipf, Family::Normal, Family::Uniform] {
        let spec = SynthSpec::new(family, 5_000, 20, 31, 3)?;
        let days = generate(&spec)?;
        let total: usize = days.iter().map(|d| d.len()).sum();
        println!(
            "{:8} cap {:3}: {} conversions, mean/user {:.2} (expected {:.2})",
            family.as_str(),
            family.cap(),
            total,
            total as f64 / spec.n_users as f64,
            expected_mean(family)
        );
    }

    let spec = SynthSpec::new(Family::FacebookLike, 1_143, 1, 7, 3)?;
    let days = generate(&spec)?;
    let (impressions, conversions) = to_event_csvs(&days, 86_400);
    println!(
        "\nfacebook_like week as CSV: {} impression rows, {} conversion rows",
        impressions.lines().count() - 1,
        conversions.lines().count() - 1
    );
    println!("first conversion rows:");
    for line in conversions.lines().take(3) {
        println!("  {line}");
    }
    Ok(())
}
