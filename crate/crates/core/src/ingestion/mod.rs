//! FCD dataset schema, loading, querying and synthetic generation.
//!
//! Records are stored at their native time-of-day resolution (5 minutes in
//! practice); coarser schemes are built by pooling in the estimation module.

mod dataset;
mod schema;
mod synthetic;

pub use dataset::{query, Dataset, FcdQuery, LinkKey, QueryRecord, QueryTarget, RouteKey};
pub use schema::{load_dataset, load_dataset_with_geometry, load_geometry, write_dataset, write_geometry};
pub use synthetic::{generate_synthetic, CongestionEvent, DaySpec, LinkSpec, ScenarioSpec};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::distribution::PercentileDistribution;
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: u32 = 86_400;

/// Converts km/h to m/s.
#[inline]
pub fn kmh_to_ms(v: f64) -> f64 {
    v / 3.6
}

/// Converts m/s to km/h.
#[inline]
pub fn ms_to_kmh(v: f64) -> f64 {
    v * 3.6
}

/// A road segment between two intersections, positioned along a route.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub index_on_route: usize,
    pub length_m: f64,
    pub speed_limit_kmh: f64,
    /// Distance from the route origin to the middle of the link.
    pub midpoint_m: f64,
}

impl Link {
    /// Time to traverse at the speed limit.
    pub fn free_flow_time_s(&self) -> f64 {
        self.length_m / kmh_to_ms(self.speed_limit_kmh)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: String,
    links: Vec<Link>,
    total_length_m: f64,
}

impl Route {
    /// Builds a route from ordered `(link_id, length_m, speed_limit_kmh)`.
    pub fn new<S: Into<String>>(id: impl Into<String>, links: impl IntoIterator<Item = (S, f64, f64)>) -> Result<Self> {
        let id = id.into();
        let mut out = Vec::new();
        let mut offset = 0.0;
        for (index, (link_id, length_m, speed_limit_kmh)) in links.into_iter().enumerate() {
            let link_id = link_id.into();
            if !(length_m.is_finite() && length_m > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "route {id}: link {link_id} has non-positive length {length_m}"
                )));
            }
            if !(speed_limit_kmh.is_finite() && speed_limit_kmh > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "route {id}: link {link_id} has non-positive speed limit {speed_limit_kmh}"
                )));
            }
            out.push(Link {
                id: link_id,
                index_on_route: index,
                length_m,
                speed_limit_kmh,
                midpoint_m: offset + length_m / 2.0,
            });
            offset += length_m;
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter(format!("route {id} has no links")));
        }
        Ok(Self {
            id,
            links: out,
            total_length_m: offset,
        })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn total_length_m(&self) -> f64 {
        self.total_length_m
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    /// Travel time with every link at its speed limit.
    pub fn free_flow_time_s(&self) -> f64 {
        self.links.iter().map(Link::free_flow_time_s).sum()
    }
}

/// Half-open window `[start, end)` in seconds since midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TodInterval {
    start: u32,
    end: u32,
}

impl TodInterval {
    pub fn new(start: u32, end: u32) -> Result<Self> {
        if start >= end || end > SECONDS_PER_DAY {
            return Err(Error::InvalidParameter(format!(
                "time-of-day interval [{start}, {end}) must satisfy 0 <= start < end <= 86400"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn whole_day() -> Self {
        Self {
            start: 0,
            end: SECONDS_PER_DAY,
        }
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.end
    }

    pub fn width_s(&self) -> u32 {
        self.end - self.start
    }

    pub fn midpoint_s(&self) -> f64 {
        (self.start as f64 + self.end as f64) / 2.0
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start as f64 <= t && t < self.end as f64
    }

    /// Positive-length overlap.
    pub fn overlaps(&self, other: &TodInterval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl std::fmt::Display for TodInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", format_hhmm(self.start), format_hhmm(self.end))
    }
}

/// `HH:MM` for seconds since midnight (24:00 allowed).
pub fn format_hhmm(seconds: u32) -> String {
    format!("{:02}:{:02}", seconds / 3600, (seconds % 3600) / 60)
}

/// Parses `HH:MM` (00:00 through 24:00) into seconds since midnight.
pub fn parse_hhmm(text: &str) -> Result<u32> {
    let bad = || Error::InvalidParameter(format!("expected HH:MM, got {text:?}"));
    let (h, m) = text.trim().split_once(':').ok_or_else(bad)?;
    let h: u32 = h.parse().map_err(|_| bad())?;
    let m: u32 = m.parse().map_err(|_| bad())?;
    if m >= 60 || h > 24 || (h == 24 && m != 0) {
        return Err(bad());
    }
    Ok(h * 3600 + m * 60)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "5min")]
    Fixed5Min,
    #[serde(rename = "20min")]
    Fixed20Min,
    #[serde(rename = "demand5")]
    DemandBased5,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Fixed5Min, SchemeKind::Fixed20Min, SchemeKind::DemandBased5];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::Fixed5Min => "5min",
            SchemeKind::Fixed20Min => "20min",
            SchemeKind::DemandBased5 => "demand5",
        }
    }

    /// Whether travel times are estimated per link (short intervals) or
    /// from the route-level distribution (long intervals).
    pub fn is_link_based(&self) -> bool {
        !matches!(self, SchemeKind::DemandBased5)
    }

    pub fn scheme(&self) -> TodScheme {
        match self {
            SchemeKind::Fixed5Min => TodScheme::fixed_5min(),
            SchemeKind::Fixed20Min => TodScheme::fixed_20min(),
            SchemeKind::DemandBased5 => TodScheme::demand_based_5(),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "5min" => Ok(SchemeKind::Fixed5Min),
            "20min" => Ok(SchemeKind::Fixed20Min),
            "demand5" => Ok(SchemeKind::DemandBased5),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme {other:?} (expected 5min, 20min or demand5)"
            ))),
        }
    }
}

/// Boundaries of the demand-based scheme: night, morning rush, daytime,
/// evening rush, evening.
pub const DEMAND_BOUNDARIES_S: [u32; 4] = [6 * 3600, 10 * 3600, 15 * 3600, 19 * 3600];

/// Contiguous time-of-day intervals covering the whole day.
#[derive(Debug, Clone, PartialEq)]
pub struct TodScheme {
    kind: SchemeKind,
    intervals: Vec<TodInterval>,
}

impl TodScheme {
    pub fn fixed_5min() -> Self {
        Self::fixed(SchemeKind::Fixed5Min, 300)
    }

    pub fn fixed_20min() -> Self {
        Self::fixed(SchemeKind::Fixed20Min, 1200)
    }

    fn fixed(kind: SchemeKind, width: u32) -> Self {
        let intervals = (0..SECONDS_PER_DAY / width)
            .map(|j| TodInterval {
                start: j * width,
                end: (j + 1) * width,
            })
            .collect();
        Self { kind, intervals }
    }

    pub fn demand_based_5() -> Self {
        Self::demand_based(DEMAND_BOUNDARIES_S).expect("default boundaries are valid")
    }

    /// Five intervals split at four strictly increasing interior boundaries.
    pub fn demand_based(boundaries: [u32; 4]) -> Result<Self> {
        let mut edges = vec![0];
        edges.extend(boundaries);
        edges.push(SECONDS_PER_DAY);
        let intervals = edges
            .windows(2)
            .map(|w| TodInterval::new(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: SchemeKind::DemandBased5,
            intervals,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn intervals(&self) -> &[TodInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Index of the interval containing `t`, wrapping `t` onto one day.
    pub fn interval_index(&self, t: f64) -> usize {
        let t = t.rem_euclid(SECONDS_PER_DAY as f64);
        let idx = self.intervals.partition_point(|iv| (iv.end as f64) <= t);
        idx.min(self.intervals.len() - 1)
    }

    pub fn interval_at(&self, t: f64) -> TodInterval {
        self.intervals[self.interval_index(t)]
    }
}

/// One link's observation for one date and time-of-day interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub link_id: String,
    pub date: NaiveDate,
    pub tod: TodInterval,
    pub sample_size: u32,
    pub full_traversal: bool,
    pub covered_distance_m: f64,
    pub speed_limit_kmh: f64,
    pub speed_percentiles: Option<PercentileDistribution>,
    pub travel_time_percentiles: Option<PercentileDistribution>,
}

/// Relative tolerance between speed and travel-time percentiles.
pub const SPEED_TRAVEL_TIME_TOLERANCE: f64 = 0.05;

impl LinkRecord {
    pub fn identity(&self) -> String {
        format!("link {} {} {}", self.link_id, self.date, self.tod)
    }

    pub fn has_data(&self) -> bool {
        self.sample_size > 0
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidRecord {
                record: self.identity(),
                reason,
            })
        };
        if !(self.covered_distance_m.is_finite() && self.covered_distance_m > 0.0) {
            return fail(format!("covered distance {} must be positive", self.covered_distance_m));
        }
        if !(self.speed_limit_kmh.is_finite() && self.speed_limit_kmh > 0.0) {
            return fail(format!("speed limit {} must be positive", self.speed_limit_kmh));
        }
        match (self.sample_size, &self.speed_percentiles, &self.travel_time_percentiles) {
            (0, None, None) => Ok(()),
            (0, _, _) => fail("sample size 0 but percentiles present".into()),
            (_, Some(speed), Some(tt)) => {
                for k in 0..speed.values().len() {
                    let v = speed.values()[k];
                    let implied = ms_to_kmh(self.covered_distance_m / tt.values()[speed.values().len() - 1 - k]);
                    if ((v - implied) / implied).abs() > SPEED_TRAVEL_TIME_TOLERANCE {
                        return fail(format!(
                            "speed percentile {k} = {v} km/h inconsistent with travel time \
                             (implies {implied:.3} km/h)"
                        ));
                    }
                }
                Ok(())
            }
            _ => fail("positive sample size requires speed and travel-time percentiles".into()),
        }
    }
}

/// Route-level travel-time observation for one date and interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteRecord {
    pub route_id: String,
    pub date: NaiveDate,
    pub tod: TodInterval,
    pub sample_size: u32,
    pub full_traversal: bool,
    pub covered_distance_m: f64,
    pub travel_time_percentiles: Option<PercentileDistribution>,
}

impl RouteRecord {
    pub fn identity(&self) -> String {
        format!("route {} {} {}", self.route_id, self.date, self.tod)
    }

    pub fn has_data(&self) -> bool {
        self.sample_size > 0
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidRecord {
                record: self.identity(),
                reason: reason.into(),
            })
        };
        if !(self.covered_distance_m.is_finite() && self.covered_distance_m > 0.0) {
            return fail("covered distance must be positive");
        }
        match (self.sample_size, &self.travel_time_percentiles) {
            (0, None) | (1.., Some(_)) => Ok(()),
            (0, Some(_)) => fail("sample size 0 but percentiles present"),
            (_, None) => fail("positive sample size requires travel-time percentiles"),
        }
    }
}
