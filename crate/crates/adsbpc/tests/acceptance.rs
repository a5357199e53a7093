//! Acceptance criteria, one test per criterion. Each prints a single
//! PASS line on success; tolerances are pinned in the assertions.

use std::time::Instant;

use adsbpc::accounting::{mechanism_budget, BoundedScales, Budget};
use adsbpc::attribution::{attribute, AttributionModel};
use adsbpc::events::{join, ConversionEvent, ImpressionEvent, Interaction};
use adsbpc::harness::{run_experiment, HarnessConfig, Method, Scenario};
use adsbpc::mechanism::{
    budget_ledger, realized_scales, run_adsbpc, run_adsbpc_with_fixed_bounds, AdsBpcConfig,
    Conversion, DayData,
};
use adsbpc::noise::NoiseGen;
use adsbpc::quantile::{private_quantile, QuantileParams};
use adsbpc::scales::{
    init_privacy_constrained, solve_utility_constrained, variance_coefficients,
};
use adsbpc::svt::{above_threshold, update_bound_svt, SvtConfig, SvtState};
use adsbpc::synth::{generate, Family, SynthSpec};
use adsbpc::workload::{prefix_sum_workload, sliding_window_workload, QueryWorkload};

fn pass(n: u32, desc: &str, started: Instant) {
    println!("PASS criterion {n}: {desc} ({:.2?})", started.elapsed());
}

fn impression(user: &str, publisher: &str, t: u64) -> ImpressionEvent {
    ImpressionEvent {
        user_id: user.into(),
        publisher_id: publisher.into(),
        advertiser_id: "Ad-1".into(),
        timestamp: t,
        interaction: Interaction::View,
    }
}

fn conversion(user: &str, t: u64) -> ConversionEvent {
    ConversionEvent { user_id: user.into(), advertiser_id: "Ad-1".into(), timestamp: t, value: 1.0 }
}

/// Two users, two publishers: the worked example tables.
fn worked_events() -> (Vec<ImpressionEvent>, Vec<ConversionEvent>) {
    (
        vec![
            impression("u1", "P-1", 1),
            impression("u1", "P-1", 11),
            impression("u2", "P-1", 15),
            impression("u2", "P-2", 25),
        ],
        vec![conversion("u1", 10), conversion("u2", 20), conversion("u2", 30)],
    )
}

#[test]
fn criterion_01_attribution_exactness() {
    let t0 = Instant::now();
    let (imps, convs) = worked_events();
    let tps = join(&imps, &convs);
    let weights = |model: AttributionModel| -> Vec<(u64, Vec<(String, f64)>)> {
        attribute(&tps, &convs, model, 100)
            .into_iter()
            .map(|a| (a.timestamp, a.weights.into_iter().collect()))
            .collect()
    };
    // Last touch: u1@10 -> P-1; u2@20 -> P-1; u2@30 -> P-2.
    let lta = weights(AttributionModel::Lta);
    assert_eq!(
        lta,
        vec![
            (10, vec![("P-1".to_string(), 1.0)]),
            (20, vec![("P-1".to_string(), 1.0)]),
            (30, vec![("P-2".to_string(), 1.0)]),
        ]
    );
    // First touch: u2@30 credits the earlier P-1 impression.
    let fta = weights(AttributionModel::Fta);
    assert_eq!(fta[2], (30, vec![("P-1".to_string(), 1.0)]));
    // Uniform: u2@30 has one touchpoint per publisher -> 0.5 each.
    let uni = weights(AttributionModel::Uni);
    assert_eq!(uni[0], (10, vec![("P-1".to_string(), 1.0)]));
    assert_eq!(
        uni[2],
        (30, vec![("P-1".to_string(), 0.5), ("P-2".to_string(), 0.5)])
    );
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    pass(1, "attribution weights reproduce the worked tables exactly", t0);
}

#[test]
fn criterion_02_join_exactness() {
    let t0 = Instant::now();
    let (imps, convs) = worked_events();
    let rows: Vec<(String, String, u64, u64)> = join(&imps, &convs)
        .into_iter()
        .map(|t| {
            (
                t.conversion.user_id,
                t.impression.publisher_id,
                t.impression.timestamp,
                t.conversion.timestamp,
            )
        })
        .collect();
    let expect = vec![
        ("u1".to_string(), "P-1".to_string(), 1, 10),
        ("u2".to_string(), "P-1".to_string(), 15, 20),
        ("u2".to_string(), "P-1".to_string(), 15, 30),
        ("u2".to_string(), "P-2".to_string(), 25, 30),
    ];
    assert_eq!(rows, expect);
    // Byte-stable ordering: permuted inputs give the identical table.
    let mut imps_rev = imps.clone();
    imps_rev.reverse();
    let mut convs_rev = convs.clone();
    convs_rev.reverse();
    let rows_rev: Vec<(String, String, u64, u64)> = join(&imps_rev, &convs_rev)
        .into_iter()
        .map(|t| {
            (
                t.conversion.user_id,
                t.impression.publisher_id,
                t.impression.timestamp,
                t.conversion.timestamp,
            )
        })
        .collect();
    assert_eq!(rows_rev, expect);
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    pass(2, "join reproduces the four-row worked table in stable order", t0);
}

/// 100 users: 15 above 10 contributions, 90 above 5.
fn walkthrough_histogram() -> adsbpc::attribution::ContributionHistogram {
    let mut counts = std::collections::BTreeMap::new();
    for i in 0..10 {
        counts.insert(format!("low-{i}"), 1 + (i % 5) as u64);
    }
    for i in 0..75 {
        counts.insert(format!("mid-{i}"), 6 + (i % 5) as u64);
    }
    for i in 0..15 {
        counts.insert(format!("high-{i}"), 11 + (i % 10) as u64);
    }
    adsbpc::attribution::ContributionHistogram { day: 0, counts }
}

#[test]
fn criterion_03_svt_walkthrough() {
    let t0 = Instant::now();
    let h = walkthrough_histogram();
    assert_eq!(above_threshold(&h, 10.0), 15);
    assert_eq!(above_threshold(&h, 5.0), 90);
    let config = SvtConfig::new(1.0, 7, 100.0, 100.0, 1.5, 0.5, 7).unwrap();
    let mut rng = NoiseGen::disabled(0);
    let mut state = SvtState::new(&config, &mut rng);
    state.bound_list = vec![10.0; 7];
    let r = update_bound_svt(&h, &config, &mut state, &mut rng).unwrap();
    // Up query 15 stays under 100; down query 15 - 90 = -75 beats -100,
    // so only the down detector fires and the bound halves.
    assert_eq!(r, 5.0);
    assert_eq!(state.count_up, 0);
    assert_eq!(state.count_down, 1);
    assert!(t0.elapsed().as_secs_f64() < 1.0);
    pass(3, "noise-free detector walkthrough lowers the bound 10 -> 5", t0);
}

/// Numeric KKT oracle for the budget-constrained calibration: inner
/// bisection recovers each variance from stationarity at multiplier
/// `lambda`; outer bisection matches the budget constraint.
fn kkt_oracle_objective(a: &[f64], r: &[f64], rho: f64) -> f64 {
    let t_of = |lambda: f64| -> Vec<f64> {
        a.iter()
            .zip(r)
            .map(|(&ai, &ri)| {
                // Solve a_i - lambda r_i^2 / t^2 = 0 for t by bisection.
                let (mut lo, mut hi) = (1e-12f64, 1e12f64);
                for _ in 0..200 {
                    let mid = (lo * hi).sqrt();
                    if ai - lambda * ri * ri / (mid * mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                (lo * hi).sqrt()
            })
            .collect()
    };
    let budget_at = |lambda: f64| -> f64 {
        t_of(lambda).iter().zip(r).map(|(&t, &ri)| ri * ri / t).sum::<f64>()
    };
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if budget_at(mid) > 2.0 * rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = t_of((lo * hi).sqrt());
    a.iter().zip(&t).map(|(&ai, &ti)| ai * ti).sum()
}

#[test]
fn criterion_04_optimizer_correctness() {
    let t0 = Instant::now();
    let mut rng = NoiseGen::seeded(404);
    // Closed-form budget-constrained solution vs the numeric KKT oracle.
    for trial in 0..50 {
        let n = 2 + (trial % 7) as usize;
        let q = prefix_sum_workload(n).unwrap();
        let gamma: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 4.0)).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.uniform(1.0, 10.0)).collect();
        let plan =
            init_privacy_constrained(&q, &gamma, &r, Budget::new(1.0).unwrap()).unwrap();
        let a = variance_coefficients(&q, &gamma);
        let oracle = kkt_oracle_objective(&a, &r, 1.0);
        let gap = (plan.objective_value - oracle).abs() / oracle;
        assert!(gap < 1e-6, "trial {trial}: gap {gap}");
    }
    // Cap-constrained solver vs a dense 2-D grid, plus its own KKT
    // certificate.
    for trial in 0..10 {
        let q = sliding_window_workload(2, 2).unwrap();
        let caps = [rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)];
        let r = [rng.uniform(1.0, 3.0), rng.uniform(1.0, 3.0)];
        let sol = solve_utility_constrained(&q, &caps, &r).unwrap();
        assert!(sol.kkt_residual(&q, &caps) <= 1e-6, "trial {trial}");
        let steps = 1500;
        let mut best = f64::INFINITY;
        for i in 1..=steps {
            for j in 1..=steps {
                let t1 = caps[0].min(caps[1]) * i as f64 / steps as f64;
                let t2 = caps[1] * j as f64 / steps as f64;
                if t1 <= caps[0] + 1e-12 && t1 + t2 <= caps[1] + 1e-12 {
                    best = best.min(r[0] * r[0] / t1 + r[1] * r[1] / t2);
                }
            }
        }
        assert!(
            (sol.objective - best).abs() / best < 1e-4,
            "trial {trial}: {} vs {best}",
            sol.objective
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 30.0);
    pass(4, "both calibration solvers match independent numeric oracles", t0);
}

#[test]
fn criterion_05_diagonal_optimality() {
    let t0 = Instant::now();
    let mut rng = NoiseGen::seeded(505);
    for &n in &[2usize, 4, 6, 8] {
        let q = prefix_sum_workload(n).unwrap();
        let gamma = vec![1.0; n];
        let r: Vec<f64> = (0..n).map(|_| rng.uniform(1.0, 10.0)).collect();
        let plan = init_privacy_constrained(&q, &gamma, &r, Budget::new(1.0).unwrap()).unwrap();
        let a = variance_coefficients(&q, &gamma);
        // Brute-force search over diagonal strategies: allocate the
        // budget across days by exact pairwise splits (cyclic coordinate
        // descent on a strictly convex objective).
        let mut alloc = vec![1.0 / n as f64; n];
        let coef: Vec<f64> = a.iter().zip(&r).map(|(&ai, &ri)| ai * ri * ri / 2.0).collect();
        for _ in 0..4000 {
            for i in 0..n {
                for j in (i + 1)..n {
                    let s = alloc[i] + alloc[j];
                    let (sa, sb) = (coef[i].sqrt(), coef[j].sqrt());
                    alloc[i] = s * sa / (sa + sb);
                    alloc[j] = s - alloc[i];
                }
            }
        }
        let brute: f64 = coef.iter().zip(&alloc).map(|(&c, &rho_i)| c / rho_i).sum();
        assert!(
            (plan.objective_value - brute).abs() < 1e-2,
            "n={n}: analytic {} vs brute {brute}",
            plan.objective_value
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 60.0);
    pass(5, "analytic objective equals the brute-force diagonal optimum", t0);
}

#[test]
fn criterion_06_budget_ledger() {
    let t0 = Instant::now();
    let days: Vec<DayData> = (0..31)
        .map(|d| {
            (0..40u32)
                .map(|u| Conversion { user: u, publisher: (u + d as u32) % 5 })
                .collect()
        })
        .collect();
    let q = prefix_sum_workload(31).unwrap();
    let config = AdsBpcConfig::defaults(Budget::new(1.0).unwrap(), 606).unwrap();
    let releases = run_adsbpc(&days, 5, &q, &config).unwrap();
    let total = budget_ledger(&releases, &config).unwrap();
    assert!((total - 1.0).abs() < 1e-9, "ledger {total}");
    // Every per-day rescale leaves the measurement budget untouched.
    let measured = mechanism_budget(&realized_scales(&releases).unwrap()).unwrap().rho();
    assert!((measured - 0.7).abs() < 1e-12, "measured {measured}");
    assert!(t0.elapsed().as_secs_f64() < 5.0);
    pass(6, "full run consumes the exact three-way budget split", t0);
}

#[test]
fn criterion_07_noise_calibration() {
    let t0 = Instant::now();
    // Per-day noise variance against the two-day closed-form plan.
    let days: Vec<DayData> = vec![vec![], vec![]];
    let q = prefix_sum_workload(2).unwrap();
    let mut config = AdsBpcConfig::defaults(Budget::new(0.5 / 0.7).unwrap(), 0).unwrap();
    config.l = 2;
    let expect = [1.0 + 1.0 / 2.0_f64.sqrt(), 1.0 + 2.0_f64.sqrt()];
    let trials = 100_000;
    let mut rng = NoiseGen::seeded(707);
    let mut sums = [0.0f64; 2];
    let mut sqs = [0.0f64; 2];
    for _ in 0..trials {
        let rels =
            run_adsbpc_with_fixed_bounds(&days, 1, &q, &config, &[1.0, 1.0], &mut rng).unwrap();
        for d in 0..2 {
            let v = rels[d].noisy_row[0];
            sums[d] += v;
            sqs[d] += v * v;
        }
    }
    for d in 0..2 {
        let mean = sums[d] / trials as f64;
        let var = sqs[d] / trials as f64 - mean * mean;
        assert!(
            (var - expect[d]).abs() / expect[d] < 0.05,
            "day {d}: var {var} vs {}",
            expect[d]
        );
    }

    // All six methods unbiased when clipping is inactive: eight users,
    // one conversion each, so any bound >= 1 keeps everything.
    let days: Vec<DayData> = (0..4)
        .map(|d| {
            (0..2u32).map(|i| Conversion { user: 2 * d as u32 + i, publisher: 0 }).collect()
        })
        .collect();
    let truth: Vec<f64> = vec![2.0, 4.0, 6.0, 8.0];
    let cfg = HarnessConfig::default();
    let trials = 10_000u64;
    for method in Method::ALL {
        let workload: QueryWorkload = cfg.workload(Scenario::PrefixWrmse, 4).unwrap();
        let mut config = cfg.adsbpc_config(Scenario::PrefixWrmse).unwrap();
        config.l = 4;
        let mut sums = [0.0f64; 4];
        let mut sqs = [0.0f64; 4];
        for t in 0..trials {
            let est = match method {
                Method::Adsbpc => {
                    let mut rng = NoiseGen::seeded(9000 + t);
                    let rels = run_adsbpc_with_fixed_bounds(
                        &days,
                        1,
                        &workload,
                        &config,
                        &[5.0; 4],
                        &mut rng,
                    )
                    .unwrap();
                    let mut vals = vec![0.0; 4];
                    for rel in &rels {
                        for ans in &rel.query_answers {
                            vals[ans.query] = ans.values[0];
                        }
                    }
                    vals
                }
                _ => adsbpc::harness::run_trial(
                    method, &days, 1, &workload, &config, 1, 9000 + t,
                )
                .unwrap()
                .into_iter()
                .map(|v| v[0])
                .collect(),
            };
            for (j, v) in est.iter().enumerate() {
                sums[j] += v;
                sqs[j] += v * v;
            }
        }
        for j in 0..4 {
            let mean = sums[j] / trials as f64;
            let var = sqs[j] / trials as f64 - mean * mean;
            let z = (mean - truth[j]) / (var / trials as f64).sqrt();
            assert!(
                z.abs() <= 3.0,
                "{} query {j}: mean {mean} truth {} z {z}",
                method.as_str(),
                truth[j]
            );
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 120.0);
    pass(7, "noise variances match the plan and all methods are unbiased", t0);
}

#[test]
fn criterion_08_sensitivity_lemmas() {
    let t0 = Instant::now();
    // Detector queries move by at most 1 under any single-user
    // substitution: exhaustive over users and replacement values.
    let mut rng = NoiseGen::seeded(808);
    for _ in 0..100 {
        let n_users = 1 + rng.uniform_usize(20);
        let counts: Vec<u64> = (0..n_users).map(|_| 1 + rng.uniform_usize(25) as u64).collect();
        let tau = rng.uniform(0.5, 20.0);
        let s_down = rng.uniform(0.1, 0.95);
        let hist = |c: &[u64]| adsbpc::attribution::ContributionHistogram {
            day: 0,
            counts: c.iter().enumerate().map(|(i, &v)| (format!("u{i}"), v)).collect(),
        };
        let base = hist(&counts);
        let up0 = above_threshold(&base, tau) as i64;
        let down0 = up0 - above_threshold(&base, tau * s_down) as i64;
        for victim in 0..n_users {
            for replacement in [1u64, 5, 13, 25] {
                let mut swapped = counts.clone();
                swapped[victim] = replacement;
                let h2 = hist(&swapped);
                let up1 = above_threshold(&h2, tau) as i64;
                let down1 = up1 - above_threshold(&h2, tau * s_down) as i64;
                assert!((up0 - up1).abs() <= 1);
                assert!((down0 - down1).abs() <= 1);
            }
        }
    }
    // The L2 formula is tight on an exhaustive small grid: per-day
    // difference rows with integer entries of L1 norm at most r_i.
    let r = [2i64, 1, 2];
    let sigma = [1.0f64, 0.5, 2.0];
    let bs = BoundedScales::new(
        r.iter().map(|&v| v as f64).collect(),
        sigma.to_vec(),
    )
    .unwrap();
    let formula = adsbpc::mechanism::sensitivity_multi(&bs);
    fn rows_with_l1(k: usize, r: i64) -> Vec<Vec<i64>> {
        fn rec(i: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for v in -left..=left {
                cur[i] = v;
                rec(i + 1, left - v.abs(), cur, out);
            }
        }
        let mut out = Vec::new();
        rec(0, r, &mut vec![0i64; k], &mut out);
        out
    }
    let per_day: Vec<Vec<Vec<i64>>> = r.iter().map(|&ri| rows_with_l1(3, ri)).collect();
    let mut best = 0.0f64;
    for r0 in &per_day[0] {
        for r1 in &per_day[1] {
            for r2 in &per_day[2] {
                let frob_sq: f64 = [r0, r1, r2]
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter().map(|&v| (v as f64 / sigma[i]).powi(2)).sum::<f64>()
                    })
                    .sum();
                let norm = frob_sq.sqrt();
                assert!(norm <= formula + 1e-9);
                best = best.max(norm);
            }
        }
    }
    assert!((best - formula).abs() < 1e-9);
    assert!(t0.elapsed().as_secs_f64() < 30.0);
    pass(8, "unit L1 detector sensitivity and tight L2 release formula", t0);
}

fn desk_spec(family: Family) -> SynthSpec {
    SynthSpec::new(family, 10_000, 50, 31, 2026).unwrap()
}

fn family_config(family: Family) -> HarnessConfig {
    let mut cfg = HarnessConfig { population: Some(10_000), ..HarnessConfig::default() };
    // Wider count cap for the heavier-tailed per-day loads.
    if matches!(family, Family::Normal | Family::Uniform) {
        cfg.lambda_cap = 20;
    }
    cfg
}

#[test]
fn criterion_09_end_to_end_ranking() {
    let t0 = Instant::now();
    let families = [Family::Zipf, Family::Normal, Family::Uniform];
    for scenario in [Scenario::PrefixWrmse, Scenario::WindowMaxvar] {
        let mut big_margins = 0;
        for family in families {
            let spec = desk_spec(family);
            let days = generate(&spec).unwrap();
            let cfg = family_config(family);
            let mut means = Vec::new();
            for method in Method::ALL {
                let res = run_experiment(
                    method,
                    scenario,
                    &days,
                    50,
                    family.cap(),
                    &cfg,
                    10,
                    909,
                )
                .unwrap();
                means.push((method, res.mean));
            }
            let ours = means.iter().find(|(m, _)| *m == Method::Adsbpc).unwrap().1;
            let second = means
                .iter()
                .filter(|(m, _)| *m != Method::Adsbpc)
                .map(|&(_, e)| e)
                .fold(f64::INFINITY, f64::min);
            println!(
                "  {} {}: ours {ours:.4e}, best baseline {second:.4e} ({})",
                family.as_str(),
                scenario.as_str(),
                means
                    .iter()
                    .map(|(m, e)| format!("{}={e:.3e}", m.as_str()))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            assert!(
                ours < second,
                "{} {}: ours {ours} not best (second {second})",
                family.as_str(),
                scenario.as_str()
            );
            if ours <= 0.9 * second {
                big_margins += 1;
            }
        }
        assert!(
            big_margins >= 2,
            "{}: only {big_margins} families with a 10% margin",
            scenario.as_str()
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 600.0);
    pass(9, "lowest error on all families and scenarios at desk scale", t0);
}

#[test]
fn criterion_10_monotonicity_sweep() {
    let t0 = Instant::now();
    let spec = desk_spec(Family::Zipf);
    let days = generate(&spec).unwrap();
    let rhos = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    for method in Method::ALL {
        let mut means = Vec::new();
        for &rho in &rhos {
            let cfg = HarnessConfig { rho_total: rho, ..family_config(Family::Zipf) };
            let res = run_experiment(
                method,
                Scenario::PrefixWrmse,
                &days,
                50,
                Family::Zipf.cap(),
                &cfg,
                10,
                1010,
            )
            .unwrap();
            means.push(res.mean);
        }
        let violations = means.windows(2).filter(|w| w[1] > w[0]).count();
        let shown: Vec<String> = means.iter().map(|m| format!("{m:.3e}")).collect();
        println!("  {}: [{}] ({violations} violations)", method.as_str(), shown.join(", "));
        assert!(
            violations <= 1,
            "{}: means {means:?} rise {violations} times",
            method.as_str()
        );
    }
    assert!(t0.elapsed().as_secs_f64() < 900.0);
    pass(10, "mean error nonincreasing in the budget for every method", t0);
}

#[test]
fn criterion_11_quantile_accuracy() {
    let t0 = Instant::now();
    let params = QuantileParams::new(0.99, 10.0, 100).unwrap();
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = NoiseGen::seeded(seed);
        let mut counts: Vec<u64> =
            (0..1000).map(|_| 1 + rng.uniform_usize(100) as u64).collect();
        counts.sort_unstable();
        let true_stat = counts[989];
        let bound = private_quantile(&counts, &params, &mut rng).unwrap();
        if (bound as i64 - true_stat as i64).abs() <= 2 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "only {hits}/100 within +/- 2");
    assert!(t0.elapsed().as_secs_f64() < 10.0);
    pass(11, "private bound tracks the true order statistic", t0);
}
