//! Synthetic FCD datasets with upstream-moving congestion waves.
//!
//! A congestion event starts at `onset_s` at position `origin_m` and moves
//! upstream (towards the route origin) at `propagation_kmh`; at position
//! `x <= origin_m` the road is congested during
//! `[onset + (origin - x) / |c|, onset + (origin - x) / |c| + duration)`.
//! In the `(x, t)` plane this is a band with slope `c`.
//!
//! Each `(link, interval)` cell gets a median speed equal to the free-flow
//! speed minus the speed drop averaged over the cell area, a relative
//! percentile spread that grows with the congested share of the cell, and
//! a small multiplicative jitter drawn from the seeded generator.

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{kmh_to_ms, Dataset, LinkRecord, Route, RouteRecord, TodInterval, SECONDS_PER_DAY};
use crate::distribution::{percentile_level, PercentileDistribution, PERCENTILE_COUNT};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Sub-samples per cell edge when averaging the speed drop over a cell.
const CELL_SUBSAMPLES: usize = 8;

/// Lowest speed the generator emits, km/h.
const MIN_SPEED_KMH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub link_id: String,
    pub length_m: f64,
    pub speed_limit_kmh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionEvent {
    pub onset_s: f64,
    pub origin_m: f64,
    #[serde(default = "default_propagation")]
    pub propagation_kmh: f64,
    pub speed_drop_kmh: f64,
    pub duration_s: f64,
}

fn default_propagation() -> f64 {
    -15.0
}

impl CongestionEvent {
    /// Whether `(x, t)` lies inside the congested band.
    pub fn covers(&self, x: f64, t: f64) -> bool {
        if x < 0.0 || x > self.origin_m {
            return false;
        }
        let arrival = self.onset_s + (self.origin_m - x) / kmh_to_ms(-self.propagation_kmh);
        t >= arrival && t < arrival + self.duration_s
    }

    /// Same event with onset moved by `shift_s`.
    pub fn shifted(&self, shift_s: f64) -> Self {
        Self {
            onset_s: self.onset_s + shift_s,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaySpec {
    pub date: NaiveDate,
    #[serde(default)]
    pub events: Vec<CongestionEvent>,
}

/// Route geometry, traffic regime and per-day congestion events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub route_id: String,
    pub links: Vec<LinkSpec>,
    pub free_flow_kmh: f64,
    /// Relative percentile spread in free flow (`p_k = m (1 + s z_k)`).
    #[serde(default = "default_free_spread")]
    pub free_flow_spread: f64,
    /// Relative percentile spread in fully congested cells.
    #[serde(default = "default_congested_spread")]
    pub congested_spread: f64,
    /// Half-width of the uniform multiplicative jitter on cell medians.
    #[serde(default = "default_jitter")]
    pub median_jitter: f64,
    /// Relative percentile spread of route-level travel times.
    #[serde(default = "default_route_spread")]
    pub route_spread: f64,
    /// Base FCD sample size per link record.
    #[serde(default = "default_sample_size")]
    pub sample_size: u32,
    #[serde(default = "default_tod_width")]
    pub tod_width_s: u32,
    #[serde(default)]
    pub unobserved_links: Vec<String>,
    #[serde(default = "default_true")]
    pub route_records: bool,
    pub days: Vec<DaySpec>,
}

fn default_free_spread() -> f64 {
    0.05
}
fn default_congested_spread() -> f64 {
    0.25
}
fn default_jitter() -> f64 {
    0.02
}
fn default_route_spread() -> f64 {
    0.05
}
fn default_sample_size() -> u32 {
    20
}
fn default_tod_width() -> u32 {
    300
}
fn default_true() -> bool {
    true
}

impl ScenarioSpec {
    /// Scenario with default regime parameters and no days.
    pub fn new(route_id: impl Into<String>, links: Vec<LinkSpec>, free_flow_kmh: f64) -> Self {
        Self {
            route_id: route_id.into(),
            links,
            free_flow_kmh,
            free_flow_spread: default_free_spread(),
            congested_spread: default_congested_spread(),
            median_jitter: default_jitter(),
            route_spread: default_route_spread(),
            sample_size: default_sample_size(),
            tod_width_s: default_tod_width(),
            unobserved_links: Vec::new(),
            route_records: true,
            days: Vec::new(),
        }
    }

    /// `n` links named `L00`, `L01`, ... with the given lengths cycled.
    pub fn links_from_lengths(n: usize, lengths_m: &[f64], speed_limit_kmh: f64) -> Vec<LinkSpec> {
        (0..n)
            .map(|i| LinkSpec {
                link_id: format!("L{i:02}"),
                length_m: lengths_m[i % lengths_m.len()],
                speed_limit_kmh,
            })
            .collect()
    }

    pub fn with_day(mut self, date: NaiveDate, events: Vec<CongestionEvent>) -> Self {
        self.days.push(DaySpec { date, events });
        self
    }

    pub fn route(&self) -> Result<Route> {
        Route::new(
            self.route_id.clone(),
            self.links
                .iter()
                .map(|l| (l.link_id.clone(), l.length_m, l.speed_limit_kmh)),
        )
        .map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<Route> {
        let route = self.route()?;
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.free_flow_kmh.is_finite() && self.free_flow_kmh > MIN_SPEED_KMH) {
            return bad(format!("free-flow speed {} km/h", self.free_flow_kmh));
        }
        for (name, v) in [
            ("free_flow_spread", self.free_flow_spread),
            ("congested_spread", self.congested_spread),
            ("median_jitter", self.median_jitter),
            ("route_spread", self.route_spread),
        ] {
            if !(0.0..0.5).contains(&v) {
                return bad(format!("{name} = {v} must lie in [0, 0.5)"));
            }
        }
        if self.tod_width_s == 0 || !SECONDS_PER_DAY.is_multiple_of(self.tod_width_s) {
            return bad(format!("tod_width_s = {} must divide 86400", self.tod_width_s));
        }
        if self.sample_size == 0 {
            return bad("sample_size must be at least 1".into());
        }
        for id in &self.unobserved_links {
            if route.link(id).is_none() {
                return bad(format!("unobserved link {id} is not on the route"));
            }
        }
        let mut dates: Vec<_> = self.days.iter().map(|d| d.date).collect();
        dates.sort();
        if dates.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate date".into());
        }
        for day in &self.days {
            for (i, e) in day.events.iter().enumerate() {
                let what = format!("{} event {i}", day.date);
                if !(0.0..=route.total_length_m()).contains(&e.origin_m) {
                    return bad(format!("{what}: origin {} m outside the route", e.origin_m));
                }
                if !(0.0..SECONDS_PER_DAY as f64).contains(&e.onset_s) {
                    return bad(format!("{what}: onset {} s outside the day", e.onset_s));
                }
                if !(e.duration_s > 0.0 && e.onset_s + e.duration_s <= SECONDS_PER_DAY as f64) {
                    return bad(format!("{what}: duration {} s outside the day", e.duration_s));
                }
                if e.propagation_kmh.is_nan() || e.propagation_kmh >= 0.0 {
                    return bad(format!(
                        "{what}: propagation {} km/h must be negative (upstream)",
                        e.propagation_kmh
                    ));
                }
                if !(e.speed_drop_kmh > 0.0 && e.speed_drop_kmh < self.free_flow_kmh - MIN_SPEED_KMH) {
                    return bad(format!("{what}: speed drop {} km/h", e.speed_drop_kmh));
                }
            }
        }
        Ok(route)
    }
}

/// Ground-truth cell: area-averaged speed drop and congested share.
fn cell_truth(events: &[CongestionEvent], x0: f64, x1: f64, t0: f64, t1: f64) -> (f64, f64) {
    if events.is_empty() {
        return (0.0, 0.0);
    }
    let n = CELL_SUBSAMPLES;
    let mut drop = 0.0;
    let mut covered = 0usize;
    for a in 0..n {
        let x = x0 + (x1 - x0) * (a as f64 + 0.5) / n as f64;
        for b in 0..n {
            let t = t0 + (t1 - t0) * (b as f64 + 0.5) / n as f64;
            let d = events
                .iter()
                .filter(|e| e.covers(x, t))
                .map(|e| e.speed_drop_kmh)
                .fold(0.0, f64::max);
            if d > 0.0 {
                covered += 1;
            }
            drop += d;
        }
    }
    let cells = (n * n) as f64;
    (drop / cells, covered as f64 / cells)
}

fn standard_normal_quantiles() -> [f64; PERCENTILE_COUNT] {
    let normal = Normal::standard();
    std::array::from_fn(|k| normal.inverse_cdf(percentile_level(k)))
}

fn spread_percentiles(median: f64, spread: f64, z: &[f64; PERCENTILE_COUNT]) -> Result<PercentileDistribution> {
    PercentileDistribution::new(std::array::from_fn(|k| {
        (median * (1.0 + spread * z[k])).max(MIN_SPEED_KMH)
    }))
}

/// Generates link (and optionally route) records for every day of the
/// scenario. Identical `(scenario, seed)` give identical datasets.
pub fn generate_synthetic(scenario: &ScenarioSpec, seed: u64) -> Result<Dataset> {
    let route = scenario.validate()?;
    let z = standard_normal_quantiles();
    let width = scenario.tod_width_s;
    let n_intervals = (SECONDS_PER_DAY / width) as usize;
    let mut dataset = Dataset::new();

    for (day_index, day) in scenario.days.iter().enumerate() {
        let mut rng = substream(seed, day_index as u64);
        // medians[link][interval], congested share alongside
        let mut medians = vec![vec![0.0; n_intervals]; route.links().len()];
        let mut shares = vec![vec![0.0; n_intervals]; route.links().len()];

        for (i, link) in route.links().iter().enumerate() {
            let x0 = link.midpoint_m - link.length_m / 2.0;
            let x1 = x0 + link.length_m;
            let unobserved = scenario.unobserved_links.contains(&link.id);
            for j in 0..n_intervals {
                let tod = TodInterval::new(j as u32 * width, (j as u32 + 1) * width)?;
                let (drop, share) = cell_truth(&day.events, x0, x1, tod.start() as f64, tod.end() as f64);
                let jitter = 1.0 + scenario.median_jitter * (2.0 * rng.random::<f64>() - 1.0);
                let extra = rng.random_range(0..=scenario.sample_size / 4);
                let median = ((scenario.free_flow_kmh - drop) * jitter).max(MIN_SPEED_KMH);
                medians[i][j] = median;
                shares[i][j] = share;

                let record = if unobserved {
                    LinkRecord {
                        link_id: link.id.clone(),
                        date: day.date,
                        tod,
                        sample_size: 0,
                        full_traversal: false,
                        covered_distance_m: link.length_m,
                        speed_limit_kmh: link.speed_limit_kmh,
                        speed_percentiles: None,
                        travel_time_percentiles: None,
                    }
                } else {
                    let spread =
                        scenario.free_flow_spread + (scenario.congested_spread - scenario.free_flow_spread) * share;
                    let speed = spread_percentiles(median, spread, &z)?;
                    let length = link.length_m;
                    let tt = speed.reversed_map(|v| length / kmh_to_ms(v))?;
                    LinkRecord {
                        link_id: link.id.clone(),
                        date: day.date,
                        tod,
                        sample_size: scenario.sample_size + extra,
                        full_traversal: extra % 2 == 0,
                        covered_distance_m: link.length_m,
                        speed_limit_kmh: link.speed_limit_kmh,
                        speed_percentiles: Some(speed),
                        travel_time_percentiles: Some(tt),
                    }
                };
                dataset.insert_link_record(record)?;
            }
        }

        if scenario.route_records {
            for j in 0..n_intervals {
                let tod = TodInterval::new(j as u32 * width, (j as u32 + 1) * width)?;
                // Trip through the cell medians, departing mid-interval.
                let mut t = tod.midpoint_s();
                let mut congested_time = 0.0;
                for (i, link) in route.links().iter().enumerate() {
                    let cell = ((t.rem_euclid(SECONDS_PER_DAY as f64)) / width as f64) as usize;
                    let cell = cell.min(n_intervals - 1);
                    let dt = link.length_m / kmh_to_ms(medians[i][cell]);
                    congested_time += dt * shares[i][cell];
                    t += dt;
                }
                let trip = t - tod.midpoint_s();
                let spread = scenario.route_spread
                    + (scenario.congested_spread - scenario.free_flow_spread) * congested_time / trip;
                let jitter = 1.0 + scenario.median_jitter * (2.0 * rng.random::<f64>() - 1.0);
                let tt = PercentileDistribution::new(std::array::from_fn(|k| {
                    (trip * jitter * (1.0 + spread * z[k])).max(1.0)
                }))?;
                dataset.insert_route_record(RouteRecord {
                    route_id: route.id.clone(),
                    date: day.date,
                    tod,
                    sample_size: (scenario.sample_size / 4).max(1),
                    full_traversal: true,
                    covered_distance_m: route.total_length_m(),
                    travel_time_percentiles: Some(tt),
                })?;
            }
        }
    }
    Ok(dataset.with_routes([route]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 2, d).unwrap()
    }

    fn small() -> ScenarioSpec {
        ScenarioSpec::new("r", ScenarioSpec::links_from_lengths(4, &[800.0, 1200.0], 120.0), 100.0)
    }

    #[test]
    fn event_band_geometry() {
        let e = CongestionEvent {
            onset_s: 1000.0,
            origin_m: 3000.0,
            propagation_kmh: -18.0,
            speed_drop_kmh: 50.0,
            duration_s: 600.0,
        };
        // 18 km/h = 5 m/s: reaches x = 2000 after 200 s.
        assert!(!e.covers(2000.0, 1199.0));
        assert!(e.covers(2000.0, 1200.0));
        assert!(e.covers(2000.0, 1799.0));
        assert!(!e.covers(2000.0, 1800.0));
        assert!(!e.covers(3001.0, 1500.0));
    }

    #[test]
    fn rejects_events_outside_bounds() {
        let event = CongestionEvent {
            onset_s: 1000.0,
            origin_m: 99_000.0,
            propagation_kmh: -15.0,
            speed_drop_kmh: 50.0,
            duration_s: 600.0,
        };
        let s = small().with_day(date(1), vec![event.clone()]);
        assert!(matches!(generate_synthetic(&s, 1), Err(Error::InvalidScenario(_))));
        let s = small().with_day(
            date(1),
            vec![CongestionEvent {
                origin_m: 100.0,
                onset_s: 90_000.0,
                ..event.clone()
            }],
        );
        assert!(matches!(generate_synthetic(&s, 1), Err(Error::InvalidScenario(_))));
        let s = small().with_day(
            date(1),
            vec![CongestionEvent {
                origin_m: 100.0,
                propagation_kmh: 15.0,
                ..event
            }],
        );
        assert!(matches!(generate_synthetic(&s, 1), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn free_flow_scenario_medians() {
        let s = small().with_day(date(1), vec![]);
        let d = generate_synthetic(&s, 3).unwrap();
        let jitter = s.free_flow_kmh * s.median_jitter;
        for r in d.link_records() {
            let m = r.speed_percentiles.unwrap().median();
            assert!((m - s.free_flow_kmh).abs() <= jitter + 1e-9, "{m}");
            assert!(r.sample_size >= 1);
        }
        assert_eq!(d.link_records().count(), 4 * 288);
        assert_eq!(d.route_records().count(), 288);
    }

    #[test]
    fn unobserved_links_have_zero_samples() {
        let mut s = small().with_day(date(1), vec![]);
        s.unobserved_links = vec!["L02".into()];
        let d = generate_synthetic(&s, 3).unwrap();
        for r in d.link_records() {
            assert_eq!(r.sample_size == 0, r.link_id == "L02");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = small().with_day(
            date(1),
            vec![CongestionEvent {
                onset_s: 7.0 * 3600.0,
                origin_m: 3000.0,
                propagation_kmh: -15.0,
                speed_drop_kmh: 60.0,
                duration_s: 1800.0,
            }],
        );
        assert_eq!(generate_synthetic(&s, 9).unwrap(), generate_synthetic(&s, 9).unwrap());
        assert_ne!(generate_synthetic(&s, 9).unwrap(), generate_synthetic(&s, 10).unwrap());
    }
}
