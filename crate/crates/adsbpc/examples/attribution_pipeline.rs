//! End-to-end attribution: parse raw event CSV, join impressions to
//! conversions, and compare last-touch, first-touch, and uniform credit.

use adsbpc::attribution::{aggregate, attribute, AttributionModel};
use adsbpc::events::{join, load_conversions, load_impressions};

const IMPRESSIONS: &str = "\
user_id,publisher_id,advertiser_id,timestamp,interaction
u1,P-1,Ad-1,1,view
u1,P-1,Ad-1,11,click
u2,P-1,Ad-1,15,view
u2,P-2,Ad-1,25,view
";

const CONVERSIONS: &str = "\
user_id,advertiser_id,timestamp,value
u1,Ad-1,10,9.99
u2,Ad-1,20,5.00
u2,Ad-1,30,5.00
";

fn main() -> adsbpc::Result<()> {
    let dir = std::env::temp_dir().join("adsbpc_attribution_example");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("impressions.csv"), IMPRESSIONS)?;
    std::fs::write(dir.join("conversions.csv"), CONVERSIONS)?;
    let impressions = load_impressions(dir.join("impressions.csv"))?;
    let conversions = load_conversions(dir.join("conversions.csv"))?;
    let touchpoints = join(&impressions, &conversions);

    println!("joined touchpoints:");
    for t in &touchpoints {
        println!(
            "  user {} saw {} at t={} before converting at t={}",
            t.conversion.user_id,
            t.impression.publisher_id,
            t.impression.timestamp,
            t.conversion.timestamp
        );
    }

    // One day spans 100 ticks here, so all events land on day 0.
    for model in [AttributionModel::Lta, AttributionModel::Fta, AttributionModel::Uni] {
        let attributed = attribute(&touchpoints, &conversions, model, 100);
        let publishers = vec!["P-1".to_string(), "P-2".to_string()];
        let x = aggregate(&attributed, 1, &publishers)?;
        println!(
            "{model:?} day-0 publisher totals: P-1={} P-2={}",
            x.values[0][0], x.values[0][1]
        );
    }
    Ok(())
}
