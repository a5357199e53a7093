//! Attribution weights (LTA/FTA/UNI), per-day aggregation, contribution
//! histograms, and per-day contribution clipping.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::events::{ConversionEvent, Touchpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributionModel {
    /// Full credit to the latest impression before the conversion.
    Lta,
    /// Full credit to the earliest impression before the conversion.
    Fta,
    /// Credit split evenly across all touchpoint impressions.
    Uni,
}

/// A conversion after attribution: per-publisher weights summing to 1 when
/// the conversion has at least one touchpoint, and to 0 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedConversion {
    pub user_id: String,
    pub day: usize,
    pub timestamp: u64,
    pub weights: BTreeMap<String, f64>,
}

/// The n-day x k-publisher matrix of summed attribution weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PublisherMatrix {
    pub n: usize,
    pub publishers: Vec<String>,
    /// `values[day][publisher]`, all entries >= 0.
    pub values: Vec<Vec<f64>>,
}

impl PublisherMatrix {
    /// The single-publisher data vector for publisher column `p`.
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[p]).collect()
    }
}

/// Per-user attributed-conversion counts for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionHistogram {
    pub day: usize,
    pub counts: BTreeMap<String, u64>,
}

/// Assign attribution weights to each conversion from its touchpoints.
///
/// `touchpoints` must come from `join` on the same `conversions` slice so
/// that `conversion_index` lines up. Conversions without touchpoints get an
/// empty weight map. The day index is `timestamp / ticks_per_day`.
pub fn attribute(
    touchpoints: &[Touchpoint],
    conversions: &[ConversionEvent],
    model: AttributionModel,
    ticks_per_day: u64,
) -> Vec<AttributedConversion> {
    let mut per_conversion: Vec<Vec<&Touchpoint>> = vec![Vec::new(); conversions.len()];
    for tp in touchpoints {
        per_conversion[tp.conversion_index].push(tp);
    }
    conversions
        .iter()
        .enumerate()
        .map(|(ci, conv)| {
            let tps = &per_conversion[ci];
            let mut weights = BTreeMap::new();
            if !tps.is_empty() {
                match model {
                    AttributionModel::Lta => {
                        let last = tps
                            .iter()
                            .max_by_key(|t| t.impression.timestamp)
                            .expect("non-empty");
                        weights.insert(last.impression.publisher_id.clone(), 1.0);
                    }
                    AttributionModel::Fta => {
                        let first = tps
                            .iter()
                            .min_by_key(|t| t.impression.timestamp)
                            .expect("non-empty");
                        weights.insert(first.impression.publisher_id.clone(), 1.0);
                    }
                    AttributionModel::Uni => {
                        let share = 1.0 / tps.len() as f64;
                        for tp in tps.iter() {
                            *weights
                                .entry(tp.impression.publisher_id.clone())
                                .or_insert(0.0) += share;
                        }
                    }
                }
            }
            AttributedConversion {
                user_id: conv.user_id.clone(),
                day: (conv.timestamp / ticks_per_day) as usize,
                timestamp: conv.timestamp,
                weights,
            }
        })
        .collect()
}

/// Sum attribution weights into the n x k publisher matrix.
pub fn aggregate(
    attributed: &[AttributedConversion],
    n: usize,
    publishers: &[String],
) -> Result<PublisherMatrix> {
    let index: BTreeMap<&str, usize> = publishers
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let mut values = vec![vec![0.0; publishers.len()]; n];
    for ac in attributed {
        if ac.day >= n {
            return Err(Error::Range(format!(
                "day {} out of range for n = {n}",
                ac.day
            )));
        }
        for (pubid, w) in &ac.weights {
            let p = *index.get(pubid.as_str()).ok_or_else(|| {
                Error::Range(format!("publisher {pubid:?} not in publisher order"))
            })?;
            values[ac.day][p] += w;
        }
    }
    Ok(PublisherMatrix {
        n,
        publishers: publishers.to_vec(),
        values,
    })
}

/// Count attributed conversions per user for one day. Conversions with an
/// empty weight map affect no released statistic and are not counted.
pub fn daily_histogram(attributed: &[AttributedConversion], day: usize) -> ContributionHistogram {
    let mut counts = BTreeMap::new();
    for ac in attributed {
        if ac.day == day && !ac.weights.is_empty() {
            *counts.entry(ac.user_id.clone()).or_insert(0) += 1;
        }
    }
    ContributionHistogram { day, counts }
}

/// Keep at most the first `r` attributed conversions (by timestamp, ties by
/// stable input order) per user on `day`; surplus conversions are dropped
/// whole, with all their publisher weights. Other days pass through.
pub fn clip(attributed: &[AttributedConversion], day: usize, r: u64) -> Vec<AttributedConversion> {
    let mut day_indices: Vec<usize> = attributed
        .iter()
        .enumerate()
        .filter(|(_, ac)| ac.day == day && !ac.weights.is_empty())
        .map(|(i, _)| i)
        .collect();
    day_indices.sort_by_key(|&i| attributed[i].timestamp);

    let mut kept_per_user: BTreeMap<&str, u64> = BTreeMap::new();
    let mut dropped = vec![false; attributed.len()];
    for &i in &day_indices {
        let kept = kept_per_user
            .entry(attributed[i].user_id.as_str())
            .or_insert(0);
        if *kept < r {
            *kept += 1;
        } else {
            dropped[i] = true;
        }
    }
    attributed
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped[*i])
        .map(|(_, ac)| ac.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::fixtures::{table2_impressions, table3_conversions};
    use crate::events::join;
    use proptest::prelude::*;

    fn worked_attribution(model: AttributionModel) -> Vec<AttributedConversion> {
        let imps = table2_impressions();
        let convs = table3_conversions();
        let tps = join(&imps, &convs);
        attribute(&tps, &convs, model, 100)
    }

    #[test]
    fn multi_touch_conversion_matches_worked_table() {
        // c_{u2,2} has touchpoints P-1@15 and P-2@25.
        let lta = worked_attribution(AttributionModel::Lta);
        assert_eq!(lta[2].weights, BTreeMap::from([("P-2".to_string(), 1.0)]));
        let fta = worked_attribution(AttributionModel::Fta);
        assert_eq!(fta[2].weights, BTreeMap::from([("P-1".to_string(), 1.0)]));
        let uni = worked_attribution(AttributionModel::Uni);
        assert_eq!(
            uni[2].weights,
            BTreeMap::from([("P-1".to_string(), 0.5), ("P-2".to_string(), 0.5)])
        );
    }

    #[test]
    fn single_touch_conversion_gets_full_weight_under_all_models() {
        for model in [
            AttributionModel::Lta,
            AttributionModel::Fta,
            AttributionModel::Uni,
        ] {
            let attributed = worked_attribution(model);
            assert_eq!(
                attributed[0].weights,
                BTreeMap::from([("P-1".to_string(), 1.0)]),
                "c_u1,1 under {model:?}"
            );
            assert_eq!(
                attributed[1].weights,
                BTreeMap::from([("P-1".to_string(), 1.0)]),
                "c_u2,1 under {model:?}"
            );
        }
    }

    #[test]
    fn conversion_without_touchpoints_gets_empty_weights() {
        let convs = vec![ConversionEvent {
            user_id: "u9".into(),
            advertiser_id: "Ad-1".into(),
            timestamp: 10,
            value: 0.0,
        }];
        let attributed = attribute(&[], &convs, AttributionModel::Lta, 100);
        assert!(attributed[0].weights.is_empty());
    }

    #[test]
    fn aggregate_matches_worked_day_totals() {
        let publishers = vec!["P-1".to_string(), "P-2".to_string()];
        // Day-1 column sums of the worked attribution table.
        let uni = aggregate(&worked_attribution(AttributionModel::Uni), 1, &publishers).unwrap();
        assert!((uni.values[0][0] - 2.5).abs() < 1e-12);
        assert!((uni.values[0][1] - 0.5).abs() < 1e-12);
        let lta = aggregate(&worked_attribution(AttributionModel::Lta), 1, &publishers).unwrap();
        assert_eq!(lta.values[0], vec![2.0, 1.0]);
    }

    #[test]
    fn aggregate_empty_input_is_zero_matrix() {
        let publishers = vec!["P-1".to_string()];
        let m = aggregate(&[], 3, &publishers).unwrap();
        assert_eq!(m.values, vec![vec![0.0], vec![0.0], vec![0.0]]);
    }

    #[test]
    fn aggregate_rejects_out_of_range_day() {
        let attributed = worked_attribution(AttributionModel::Lta);
        let publishers = vec!["P-1".to_string(), "P-2".to_string()];
        // All worked conversions are on day 0, so n = 0 forces the error.
        assert!(matches!(
            aggregate(&attributed, 0, &publishers),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn daily_histogram_matches_worked_example() {
        let hist = daily_histogram(&worked_attribution(AttributionModel::Uni), 0);
        assert_eq!(
            hist.counts,
            BTreeMap::from([("u1".to_string(), 1), ("u2".to_string(), 2)])
        );
        assert!(daily_histogram(&[], 0).counts.is_empty());
    }

    #[test]
    fn histogram_counts_repeat_conversions() {
        let mut convs = Vec::new();
        for t in 0..5 {
            convs.push(ConversionEvent {
                user_id: "u".into(),
                advertiser_id: "A".into(),
                timestamp: t + 1,
                value: 0.0,
            });
        }
        let imp = crate::events::ImpressionEvent {
            user_id: "u".into(),
            publisher_id: "P".into(),
            advertiser_id: "A".into(),
            timestamp: 0,
            interaction: crate::events::Interaction::View,
        };
        let tps = join(&[imp], &convs);
        let attributed = attribute(&tps, &convs, AttributionModel::Lta, 100);
        assert_eq!(daily_histogram(&attributed, 0).counts["u"], 5);
    }

    #[test]
    fn clip_keeps_earliest_conversions() {
        let attributed = worked_attribution(AttributionModel::Lta);
        let clipped = clip(&attributed, 0, 1);
        let hist = daily_histogram(&clipped, 0);
        assert_eq!(hist.counts["u2"], 1);
        // u2's earliest conversion is at t=20.
        assert!(clipped
            .iter()
            .any(|ac| ac.user_id == "u2" && ac.timestamp == 20));
        assert!(!clipped
            .iter()
            .any(|ac| ac.user_id == "u2" && ac.timestamp == 30));
    }

    #[test]
    fn clip_with_large_bound_is_identity() {
        let attributed = worked_attribution(AttributionModel::Uni);
        assert_eq!(clip(&attributed, 0, 10), attributed);
    }

    #[test]
    fn clip_drops_latest_of_three() {
        let convs: Vec<ConversionEvent> = [10u64, 20, 30]
            .iter()
            .map(|&t| ConversionEvent {
                user_id: "u".into(),
                advertiser_id: "A".into(),
                timestamp: t,
                value: 0.0,
            })
            .collect();
        let imp = crate::events::ImpressionEvent {
            user_id: "u".into(),
            publisher_id: "P".into(),
            advertiser_id: "A".into(),
            timestamp: 0,
            interaction: crate::events::Interaction::View,
        };
        let tps = join(&[imp], &convs);
        let attributed = attribute(&tps, &convs, AttributionModel::Lta, 100);
        let clipped = clip(&attributed, 0, 2);
        let times: Vec<u64> = clipped.iter().map(|ac| ac.timestamp).collect();
        assert_eq!(times, vec![10, 20]);
    }

    proptest! {
        // Per conversion the total weight is 0 (no touchpoints) or 1.
        #[test]
        fn weights_sum_to_zero_or_one(
            imp_ts in prop::collection::vec(0u64..50, 0..8),
            conv_ts in prop::collection::vec(1u64..60, 1..6),
            model in prop::sample::select(vec![
                AttributionModel::Lta, AttributionModel::Fta, AttributionModel::Uni
            ]),
        ) {
            let imps: Vec<_> = imp_ts.iter().enumerate().map(|(i, &t)| crate::events::ImpressionEvent {
                user_id: "u".into(),
                publisher_id: format!("P-{}", i % 3),
                advertiser_id: "A".into(),
                timestamp: t,
                interaction: crate::events::Interaction::View,
            }).collect();
            let convs: Vec<_> = conv_ts.iter().map(|&t| ConversionEvent {
                user_id: "u".into(),
                advertiser_id: "A".into(),
                timestamp: t,
                value: 0.0,
            }).collect();
            let tps = join(&imps, &convs);
            for ac in attribute(&tps, &convs, model, 1000) {
                let total: f64 = ac.weights.values().sum();
                prop_assert!(total.abs() < 1e-12 || (total - 1.0).abs() < 1e-12);
                for w in ac.weights.values() {
                    prop_assert!(*w >= 0.0);
                }
            }
        }

        // Join equals the brute-force filtered Cartesian product, and its
        // canonical order survives input permutation.
        #[test]
        fn join_matches_bruteforce_and_is_permutation_stable(
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let mut imps = Vec::new();
            for i in 0..10u64 {
                imps.push(crate::events::ImpressionEvent {
                    user_id: format!("u{}", i % 3),
                    publisher_id: format!("P{}", i % 2),
                    advertiser_id: format!("A{}", i % 2),
                    timestamp: (i * 7) % 40,
                    interaction: crate::events::Interaction::View,
                });
            }
            let mut convs = Vec::new();
            for i in 0..6u64 {
                convs.push(ConversionEvent {
                    user_id: format!("u{}", i % 3),
                    advertiser_id: format!("A{}", i % 2),
                    timestamp: (i * 11) % 45,
                    value: 0.0,
                });
            }
            let reference: Vec<_> = join(&imps, &convs)
                .into_iter()
                .map(|t| (t.conversion, t.impression))
                .collect();
            // Brute-force double loop over the Cartesian product.
            let mut brute = Vec::new();
            for c in &convs {
                for i in &imps {
                    if i.user_id == c.user_id && i.advertiser_id == c.advertiser_id
                        && i.timestamp < c.timestamp {
                        brute.push((c.clone(), i.clone()));
                    }
                }
            }
            prop_assert_eq!(reference.len(), brute.len());
            for pair in &brute {
                prop_assert!(reference.contains(pair));
            }
            // Permute inputs; canonical output must match.
            imps.shuffle(&mut rng);
            convs.shuffle(&mut rng);
            let permuted: Vec<_> = join(&imps, &convs)
                .into_iter()
                .map(|t| (t.conversion, t.impression))
                .collect();
            prop_assert_eq!(reference, permuted);
        }

        // After clip with bound r, every user's per-day count <= r, and
        // aggregates never increase.
        #[test]
        fn clip_bounds_counts_and_shrinks_aggregates(
            n_conv in 1usize..30,
            r in 1u64..4,
            seed in 0u64..500,
        ) {
            use rand::Rng;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let publishers: Vec<String> = (0..3).map(|p| format!("P{p}")).collect();
            let mut attributed = Vec::new();
            for i in 0..n_conv {
                let day = rng.gen_range(0..3usize);
                let p = rng.gen_range(0..3usize);
                attributed.push(AttributedConversion {
                    user_id: format!("u{}", rng.gen_range(0..4)),
                    day,
                    timestamp: (day * 100 + i) as u64,
                    weights: BTreeMap::from([(publishers[p].clone(), 1.0)]),
                });
            }
            for day in 0..3 {
                let clipped = clip(&attributed, day, r);
                for (_, count) in daily_histogram(&clipped, day).counts {
                    prop_assert!(count <= r);
                }
                let before = aggregate(&attributed, 3, &publishers).unwrap();
                let after = aggregate(&clipped, 3, &publishers).unwrap();
                for d in 0..3 {
                    for p in 0..3 {
                        prop_assert!(after.values[d][p] <= before.values[d][p] + 1e-12);
                    }
                }
            }
        }
    }
}
