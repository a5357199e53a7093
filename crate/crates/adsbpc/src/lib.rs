//! User-level differentially private streaming advertising measurement.
//!
//! The crate covers the full measurement pipeline: impression/conversion
//! ingestion and joining, multi-touch attribution, zCDP budget accounting,
//! noise-scale calibration, private per-day contribution bounding
//! (exponential-mechanism quantile + sparse vector technique), the online
//! bounded-per-day-contribution release mechanism, five comparison
//! baselines, synthetic dataset generation, and a seeded experiment
//! harness.
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod accounting;
pub mod attribution;
pub mod baselines;
pub mod error;
pub mod events;
pub mod harness;
pub mod mechanism;
pub mod noise;
pub mod quantile;
pub mod scales;
pub mod svt;
pub mod synth;
pub mod workload;

pub use error::{Error, Result};
