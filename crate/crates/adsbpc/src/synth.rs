//! Synthetic event-stream generation: per-user conversion totals drawn
//! from a distribution family, with uniform i.i.d. day and publisher
//! placement. The `criteo_like` and `facebook_like` families are shape
//! substitutes matching the schema and scale of those datasets, not the
//! real data.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mechanism::{Conversion, DayData};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Zipf(3) + 10, capped at 50 total conversions per user.
    Zipf,
    /// Normal(50, 30), rounded and clamped to [0, 150].
    Normal,
    /// Uniform on {1, ..., 256}.
    Uniform,
    /// Heavy-tailed Zipf(4.3) capped at 44; 287 publishers by default.
    CriteoLike,
    /// Zipf(2) capped at 60; a single publisher, 1143 users by default.
    FacebookLike,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zipf" => Ok(Family::Zipf),
            "normal" => Ok(Family::Normal),
            "uniform" => Ok(Family::Uniform),
            "criteo_like" => Ok(Family::CriteoLike),
            "facebook_like" => Ok(Family::FacebookLike),
            other => Err(Error::Config(format!("unknown dataset family {other:?}"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Zipf => "zipf",
            Family::Normal => "normal",
            Family::Uniform => "uniform",
            Family::CriteoLike => "criteo_like",
            Family::FacebookLike => "facebook_like",
        }
    }

    /// Hard cap on per-user totals: the global sensitivity the
    /// group-privacy baselines use.
    pub fn cap(&self) -> u64 {
        match self {
            Family::Zipf => 50,
            Family::Normal => 150,
            Family::Uniform => 256,
            Family::CriteoLike => 44,
            Family::FacebookLike => 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub family: Family,
    pub n_users: u64,
    pub n_publishers: u32,
    pub n_days: usize,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(family: Family, n_users: u64, n_publishers: u32, n_days: usize, seed: u64) -> Result<Self> {
        if n_publishers == 0 || n_days == 0 {
            return Err(Error::Config("need at least one publisher and one day".into()));
        }
        Ok(SynthSpec { family, n_users, n_publishers, n_days, seed })
    }

    /// Full-scale defaults per family.
    pub fn full_scale(family: Family, seed: u64) -> Self {
        let (n_users, n_publishers) = match family {
            Family::Zipf | Family::Normal | Family::Uniform => (1_000_000, 1000),
            Family::CriteoLike => (1_600_000, 287),
            Family::FacebookLike => (1143, 1),
        };
        SynthSpec { family, n_users, n_publishers, n_days: 31, seed }
    }
}

/// Shrink a spec by `factor` for desk-scale experiments, flooring at one
/// user and one publisher. Absolute errors shift with scale; method
/// rankings are what desk-scale runs preserve.
pub fn scale_down(spec: &SynthSpec, factor: u64) -> Result<SynthSpec> {
    if factor == 0 {
        return Err(Error::Config("scale factor must be at least 1".into()));
    }
    Ok(SynthSpec {
        n_users: (spec.n_users / factor).max(1),
        n_publishers: ((spec.n_publishers as u64 / factor).max(1)) as u32,
        ..*spec
    })
}

/// Inverse-CDF table for a truncated power law P(v) proportional to
/// v^(-s) on {1, ..., vmax}, with the tail beyond vmax lumped into the
/// last bin.
struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    fn new(s: f64, vmax: u64) -> Self {
        // Extend well past vmax so the lumped tail is negligible.
        let far = (vmax * 200).max(10_000);
        let mut total = 0.0;
        let mut mass = vec![0.0f64; vmax as usize];
        for v in 1..=far {
            let p = (v as f64).powf(-s);
            total += p;
            mass[(v.min(vmax) - 1) as usize] += p;
        }
        let mut cdf = Vec::with_capacity(vmax as usize);
        let mut acc = 0.0;
        for m in &mass {
            acc += m / total;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        ZipfTable { cdf }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> u64 {
        let u: f64 = rng.gen();
        (self.cdf.partition_point(|&c| c < u) + 1) as u64
    }

    fn mean(&self) -> f64 {
        let mut prev = 0.0;
        self.cdf
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let p = c - prev;
                prev = c;
                (i + 1) as f64 * p
            })
            .sum()
    }
}

enum Sampler {
    Shifted { table: ZipfTable, shift: u64, cap: u64 },
    Plain { table: ZipfTable },
    Normal { dist: Normal<f64>, cap: u64 },
    Uniform { hi: u64 },
}

impl Sampler {
    fn for_family(family: Family) -> Self {
        match family {
            Family::Zipf => Sampler::Shifted {
                table: ZipfTable::new(3.0, 40),
                shift: 10,
                cap: 50,
            },
            Family::Normal => Sampler::Normal {
                dist: Normal::new(50.0, 30.0).unwrap(),
                cap: 150,
            },
            Family::Uniform => Sampler::Uniform { hi: 256 },
            Family::CriteoLike => Sampler::Plain { table: ZipfTable::new(4.3, 44) },
            Family::FacebookLike => Sampler::Plain { table: ZipfTable::new(2.0, 60) },
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> u64 {
        match self {
            Sampler::Shifted { table, shift, cap } => (shift + table.sample(rng)).min(*cap),
            Sampler::Plain { table } => table.sample(rng),
            Sampler::Normal { dist, cap } => {
                let v = dist.sample(rng).round();
                v.clamp(0.0, *cap as f64) as u64
            }
            Sampler::Uniform { hi } => rng.gen_range(1..=*hi),
        }
    }
}

fn user_rng(seed: u64, user: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ (user + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Generate a per-day stream of attributed conversions. Each user's total
/// is drawn from the family's distribution; each conversion lands on a
/// uniform day and publisher. Per-user generators make the output
/// independent of iteration order.
pub fn generate(spec: &SynthSpec) -> Result<Vec<DayData>> {
    let sampler = Sampler::for_family(spec.family);
    let mut days: Vec<DayData> = vec![Vec::new(); spec.n_days];
    for user in 0..spec.n_users {
        let mut rng = user_rng(spec.seed, user);
        let total = sampler.sample(&mut rng);
        for _ in 0..total {
            let day = rng.gen_range(0..spec.n_days);
            let publisher = rng.gen_range(0..spec.n_publishers);
            days[day].push(Conversion { user: user as u32, publisher });
        }
    }
    Ok(days)
}

/// Expected per-user total of a family, computed from the same truncated
/// distributions the generator samples.
pub fn expected_mean(family: Family) -> f64 {
    match Sampler::for_family(family) {
        Sampler::Shifted { table, shift, cap } => {
            // The shift plus the table mean, ignoring the (negligible)
            // clamp at the cap.
            let _ = cap;
            shift as f64 + table.mean()
        }
        Sampler::Plain { table } => table.mean(),
        Sampler::Normal { .. } => 50.0,
        Sampler::Uniform { hi } => (1 + hi) as f64 / 2.0,
    }
}

/// Render a stream in the raw-event CSV schema, so generated data flows
/// through the real ingestion and attribution path. Each conversion gets
/// its own advertiser id and a single matching impression, making
/// last-touch attribution recover the intended publisher exactly.
pub fn to_event_csvs(days: &[DayData], ticks_per_day: u64) -> (String, String) {
    let mut impressions = String::from(crate::events::IMPRESSION_HEADER);
    impressions.push('\n');
    let mut conversions = String::from(crate::events::CONVERSION_HEADER);
    conversions.push('\n');
    let mut serial = 0u64;
    for (d, day) in days.iter().enumerate() {
        let t_imp = d as u64 * ticks_per_day + 1;
        let t_conv = d as u64 * ticks_per_day + 2;
        for conv in day {
            impressions.push_str(&format!(
                "u{},p{},ad{serial},{t_imp},view\n",
                conv.user, conv.publisher
            ));
            conversions.push_str(&format!("u{},ad{serial},{t_conv},1.0\n", conv.user));
            serial += 1;
        }
    }
    (impressions, conversions)
}
