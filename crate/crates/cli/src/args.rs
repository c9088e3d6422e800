use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use fcd_core::ingestion::SchemeKind;

#[derive(Debug, Parser)]
#[command(
    name = "fcdtt",
    version,
    about = "Speed fields and travel-time distributions from floating car data percentiles"
)]
pub struct Cli {
    /// TOML file supplying values for any long flag (flags win)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads [default: all cores]; output does not depend on it
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a scenario file
    Synth(SynthArgs),
    /// Reconstruct the speed field of one route and day
    Field(FieldArgs),
    /// Monte Carlo travel-time distribution for one or more departures
    Estimate(EstimateArgs),
    /// Forecast from historical days and compare with the target day
    Forecast(ForecastArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario description (JSON)
    #[arg(long, value_name = "FILE")]
    pub scenario: Option<PathBuf>,

    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output directory for records.jsonl and geometry.jsonl
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Link and route records (JSON lines)
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,

    /// Route geometry (JSON lines)
    #[arg(long, value_name = "FILE")]
    pub geometry: Option<PathBuf>,

    /// Route identifier
    #[arg(long)]
    pub route: Option<String>,

    /// Day, YYYY-MM-DD
    #[arg(long, value_parser = parse_date)]
    pub date: Option<NaiveDate>,

    /// Output file [default: standard output]
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Free-flow propagation speed, km/h [default: 70]
    #[arg(long, allow_negative_numbers = true)]
    pub c_free: Option<f64>,

    /// Congested propagation speed, km/h [default: -15]
    #[arg(long, allow_negative_numbers = true)]
    pub c_cong: Option<f64>,

    /// Crossover speed between the regimes, km/h [default: 50]
    #[arg(long)]
    pub v_c: Option<f64>,

    /// Width of the crossover, km/h [default: 10]
    #[arg(long)]
    pub delta_v: Option<f64>,

    /// Grid step along the route, m [default: median link length]
    #[arg(long)]
    pub dx: Option<f64>,

    /// Grid step in time, s [default: 300]
    #[arg(long)]
    pub dt: Option<f64>,

    /// Start of the time window, HH:MM [default: 00:00]
    #[arg(long)]
    pub from: Option<String>,

    /// End of the time window, HH:MM [default: 24:00]
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulationArgs {
    /// Time-of-day scheme: 5min, 20min or demand5
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<SchemeKind>,

    /// Quantile window half-width in (0, 1] [default: 1]
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Monte Carlo runs per departure and day [default: 500]
    #[arg(long)]
    pub runs: Option<usize>,

    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub sim: SimulationArgs,

    /// Single departure, HH:MM
    #[arg(long)]
    pub departure: Option<String>,

    /// Sweep departures every N minutes instead of a single departure
    #[arg(long, value_name = "MINUTES")]
    pub sweep_step: Option<u32>,

    /// First sweep departure, HH:MM [default: 00:00]
    #[arg(long)]
    pub sweep_start: Option<String>,

    /// End of the sweep (exclusive), HH:MM [default: 24:00]
    #[arg(long)]
    pub sweep_end: Option<String>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub sim: SimulationArgs,

    /// Departure on the target date, HH:MM
    #[arg(long)]
    pub departure: Option<String>,

    /// prev-week, prev-month, prev-3-months or custom [default: prev-month]
    #[arg(long)]
    pub strategy: Option<String>,

    /// Run all three named strategies
    #[arg(long)]
    pub all_strategies: bool,

    /// Historical dates for the custom strategy, comma separated
    #[arg(long, value_delimiter = ',', value_parser = parse_date)]
    pub custom_dates: Option<Vec<NaiveDate>>,

    /// Dates to leave out (holidays), comma separated
    #[arg(long, value_delimiter = ',', value_parser = parse_date)]
    pub exclude_dates: Option<Vec<NaiveDate>>,

    /// Allow historical days of any weekday
    #[arg(long)]
    pub any_weekday: bool,

    /// Overlap test width in forecast standard deviations [default: 1]
    #[arg(long)]
    pub k: Option<f64>,
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| format!("expected YYYY-MM-DD, got {s:?}: {e}"))
}

pub fn parse_scheme(s: &str) -> Result<SchemeKind, String> {
    s.parse().map_err(|e: fcd_core::Error| e.to_string())
}
