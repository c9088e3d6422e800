//! Forecasts from historical days and comparison with the target day.
//!
//! A forecast simulates the target departure on each selected historical day
//! and pools the raw travel-time samples across days, so day-to-day shifts
//! of congestion stay visible as spread (or several modes) in the result.

mod report;

pub use report::{write_forecast_report, ForecastRow};

use std::collections::BTreeSet;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};

use crate::distribution::{summarize, SampleSummary};
use crate::error::{Error, Result};
use crate::estimation::{
    aggregate_route_records, build_matrix, estimate_distribution_with, route_based_estimate, SimulationConfig,
};
use crate::ingestion::{Dataset, Route, SchemeKind};
use crate::parallel::Execution;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HistoryKind {
    /// Same weekday one week earlier.
    PrevWeek,
    /// The 4 preceding same weekdays.
    PrevMonth,
    /// The 12 preceding same weekdays.
    Prev3Months,
    /// Explicit dates.
    Custom(Vec<NaiveDate>),
}

impl HistoryKind {
    pub const NAMED: [HistoryKind; 3] = [HistoryKind::PrevWeek, HistoryKind::PrevMonth, HistoryKind::Prev3Months];

    pub fn name(&self) -> &'static str {
        match self {
            HistoryKind::PrevWeek => "prev-week",
            HistoryKind::PrevMonth => "prev-month",
            HistoryKind::Prev3Months => "prev-3-months",
            HistoryKind::Custom(_) => "custom",
        }
    }

    /// Nominal number of historical days.
    pub fn day_count(&self) -> usize {
        match self {
            HistoryKind::PrevWeek => 1,
            HistoryKind::PrevMonth => 4,
            HistoryKind::Prev3Months => 12,
            HistoryKind::Custom(dates) => dates.len(),
        }
    }
}

impl FromStr for HistoryKind {
    type Err = Error;

    /// Parses the named kinds; `custom` needs explicit dates and is built
    /// with [`HistoryKind::Custom`].
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prev-week" => Ok(HistoryKind::PrevWeek),
            "prev-month" => Ok(HistoryKind::PrevMonth),
            "prev-3-months" => Ok(HistoryKind::Prev3Months),
            _ => Err(Error::InvalidParameter(format!(
                "unknown strategy {s:?} (expected prev-week, prev-month, prev-3-months or custom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryStrategy {
    pub kind: HistoryKind,
    pub weekday_lock: bool,
    /// Dates to skip, e.g. holidays.
    pub exclusions: Vec<NaiveDate>,
}

impl HistoryStrategy {
    pub fn new(kind: HistoryKind) -> Self {
        Self {
            kind,
            weekday_lock: true,
            exclusions: Vec::new(),
        }
    }

    pub fn custom(dates: Vec<NaiveDate>) -> Self {
        Self::new(HistoryKind::Custom(dates))
    }

    pub fn excluding(mut self, dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        self.exclusions.extend(dates);
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

/// Resolves the historical days of `strategy` for `target`, most recent
/// first.
///
/// Named kinds look back a fixed window: the `N` same weekdays before the
/// target with the weekday lock, otherwise every day of the previous `7 N`
/// days. Excluded and unavailable dates are dropped from the window, not
/// replaced.
pub fn select_historical_days(
    target: NaiveDate,
    strategy: &HistoryStrategy,
    available: &BTreeSet<NaiveDate>,
) -> Result<Vec<NaiveDate>> {
    if available.is_empty() {
        return Err(Error::Precondition("no dates available".into()));
    }
    let window: Vec<NaiveDate> = match &strategy.kind {
        HistoryKind::Custom(dates) => dates.clone(),
        kind => {
            let n = kind.day_count() as i64;
            if strategy.weekday_lock {
                (1..=n).map(|k| target - Duration::days(7 * k)).collect()
            } else {
                (1..=7 * n).map(|k| target - Duration::days(k)).collect()
            }
        }
    };
    let mut days: Vec<NaiveDate> = window
        .into_iter()
        .filter(|d| available.contains(d))
        .filter(|d| !strategy.weekday_lock || d.weekday() == target.weekday())
        .filter(|d| !strategy.exclusions.contains(d))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    days.reverse();
    if days.is_empty() {
        let found = available
            .range(..target)
            .rev()
            .filter(|d| !strategy.weekday_lock || d.weekday() == target.weekday())
            .take(12)
            .copied()
            .collect();
        return Err(Error::InsufficientHistory { target, found });
    }
    Ok(days)
}

/// Target date and departure time of day in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Target {
    pub date: NaiveDate,
    pub departure_s: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub target: Target,
    pub strategy: HistoryStrategy,
    pub scheme: SchemeKind,
    pub alpha: f64,
    /// Historical days used, most recent first.
    pub days: Vec<NaiveDate>,
    /// Raw samples of all days, concatenated in `days` order.
    pub samples: Vec<f64>,
    pub summary: SampleSummary,
    pub fcd_sample_size: u64,
    pub warnings: Vec<String>,
}

struct DayEstimate {
    samples: Vec<f64>,
    fcd_sample_size: u64,
    warnings: Vec<String>,
}

fn estimate_day(
    dataset: &Dataset,
    route: &Route,
    date: NaiveDate,
    departure_s: f64,
    scheme: SchemeKind,
    config: &SimulationConfig,
    execution: Execution,
) -> Result<DayEstimate> {
    if scheme.is_link_based() {
        let matrix = build_matrix(dataset, route, &scheme.scheme(), &[date])?;
        let est = estimate_distribution_with(&matrix, departure_s, config, execution)?;
        Ok(DayEstimate {
            samples: est.samples,
            fcd_sample_size: est.fcd_sample_size,
            warnings: Vec::new(),
        })
    } else {
        let records = aggregate_route_records(dataset.route_records_on(&route.id, date), &scheme.scheme())?;
        let est = route_based_estimate(route, &records, departure_s, config.n_runs, config.seed)?;
        Ok(DayEstimate {
            samples: est.samples,
            fcd_sample_size: est.fcd_sample_size,
            warnings: est.warnings,
        })
    }
}

/// Simulates the target departure on every historical day with the same
/// configuration and pools the samples.
pub fn forecast(
    dataset: &Dataset,
    route: &Route,
    target: Target,
    strategy: &HistoryStrategy,
    scheme: SchemeKind,
    config: &SimulationConfig,
    execution: Execution,
) -> Result<Forecast> {
    config.validate()?;
    let days = select_historical_days(target.date, strategy, &dataset.dates_for_route(route))?;
    let mut samples = Vec::with_capacity(days.len() * config.n_runs);
    let mut fcd_sample_size = 0;
    let mut warnings = Vec::new();
    for &day in &days {
        let est = estimate_day(
            dataset,
            route,
            day,
            target.departure_s as f64,
            scheme,
            config,
            execution,
        )?;
        samples.extend(est.samples);
        fcd_sample_size += est.fcd_sample_size;
        for w in est.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    Ok(Forecast {
        target,
        strategy: strategy.clone(),
        scheme,
        alpha: config.alpha,
        days,
        summary: summarize(&samples)?,
        samples,
        fcd_sample_size,
        warnings,
    })
}

/// The estimate computed from the target day's own data.
pub fn reference_estimate(
    dataset: &Dataset,
    route: &Route,
    target: Target,
    scheme: SchemeKind,
    config: &SimulationConfig,
    execution: Execution,
) -> Result<Forecast> {
    if !dataset.dates_for_route(route).contains(&target.date) {
        return Err(Error::NoData(format!(
            "no records of route {} on {}",
            route.id, target.date
        )));
    }
    forecast(
        dataset,
        route,
        target,
        &HistoryStrategy::custom(vec![target.date]),
        scheme,
        config,
        execution,
    )
}

/// Default number of forecast standard deviations for the overlap test.
pub const DEFAULT_OVERLAP_K: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub reference: SampleSummary,
    pub forecast: SampleSummary,
    /// Forecast mean minus reference mean.
    pub mean_error: f64,
    /// `|mean_error| / forecast std`; infinite when the forecast std is 0
    /// and the means differ.
    pub z_score: f64,
    /// Reference mean within forecast mean plus or minus `k` std.
    pub overlap: bool,
    pub k: f64,
}

pub fn compare(reference: &SampleSummary, forecast: &SampleSummary, k: f64) -> Result<ComparisonReport> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::InvalidParameter(format!("overlap factor k = {k}")));
    }
    let mean_error = forecast.mean - reference.mean;
    let z_score = if mean_error == 0.0 {
        0.0
    } else if forecast.std == 0.0 {
        f64::INFINITY
    } else {
        mean_error.abs() / forecast.std
    };
    Ok(ComparisonReport {
        reference: reference.clone(),
        forecast: forecast.clone(),
        mean_error,
        z_score,
        overlap: z_score <= k,
        k,
    })
}
