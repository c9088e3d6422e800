//! Travel-time estimation from floating car data (FCD) percentile records.
//!
//! * [`distribution`]: 19-point percentile distributions and sampling.
//! * [`ingestion`]: records, routes, time-of-day schemes, file I/O and a
//!   synthetic scenario generator.
//! * [`speedfield`]: spatiotemporal speed reconstruction with the adaptive
//!   smoothing method.
//! * [`estimation`]: Monte Carlo route travel times.
//! * [`prediction`]: forecasts from historical days.

pub mod distribution;
pub mod error;
pub mod estimation;
pub mod ingestion;
pub mod parallel;
pub mod prediction;
pub mod rng;
pub mod speedfield;

pub use distribution::{build_cdf, summarize, PercentileDistribution, PiecewiseCdf, SampleSummary};
pub use error::{Error, Result};
pub use parallel::Execution;
