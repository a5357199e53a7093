//! Tracking the per-day user contribution bound with a pair of sparse
//! vector detectors: one watches for the bound being too low, the other
//! for it being wastefully high.

use std::collections::BTreeMap;

use adsbpc::attribution::ContributionHistogram;
use adsbpc::noise::NoiseGen;
use adsbpc::svt::{above_threshold, update_bound_svt, SvtConfig, SvtState};

/// 100 users: 10 light (1-5 conversions), 75 medium (6-10), 15 heavy (11-20).
fn histogram(day: usize) -> ContributionHistogram {
    let mut counts = BTreeMap::new();
    for i in 0..10u32 {
        counts.insert(format!("light-{i}"), 1 + (i % 5) as u64);
    }
    for i in 0..75u32 {
        counts.insert(format!("mid-{i}"), 6 + (i % 5) as u64);
    }
    for i in 0..15u32 {
        counts.insert(format!("heavy-{i}"), 11 + (i % 10) as u64);
    }
    ContributionHistogram { day, counts }
}

fn main() -> adsbpc::Result<()> {
    let h = histogram(0);
    println!("users above 10 contributions: {}", above_threshold(&h, 10.0));
    println!("users above  5 contributions: {}", above_threshold(&h, 5.0));

    // Noise disabled to show the detector logic itself. Current bound 10:
    // few users sit above it, and few sit in (5, 10], so halving the bound
    // cuts noise without meaningful extra clipping.
    let config = SvtConfig::new(1.0, 7, 100.0, 100.0, 1.5, 0.5, 7)?;
    let mut rng = NoiseGen::disabled(0);
    let mut state = SvtState::new(&config, &mut rng);
    state.bound_list = vec![10.0; 7];

    for day in 0..3 {
        let bound = update_bound_svt(&histogram(day), &config, &mut state, &mut rng)?;
        println!(
            "day {day}: bound {bound} (raised {} times, lowered {} times)",
            state.count_up, state.count_down
        );
    }
    Ok(())
}
