use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::Rng;

use crate::distribution::{build_cdf, pool, summarize, PiecewiseCdf, SampleSummary};
use crate::error::{Error, Result};
use crate::ingestion::{Route, RouteRecord, TodScheme, SECONDS_PER_DAY};
use crate::rng::substream;

/// Pools native route records into the intervals of `scheme`.
///
/// Records are grouped per route, date and the scheme interval containing
/// their midpoint; each group becomes one record weighted by sample size.
/// Groups without data are dropped.
pub fn aggregate_route_records<'a>(
    records: impl IntoIterator<Item = &'a RouteRecord>,
    scheme: &TodScheme,
) -> Result<Vec<RouteRecord>> {
    let mut groups: BTreeMap<(String, NaiveDate, usize), Vec<&RouteRecord>> = BTreeMap::new();
    for rec in records {
        if rec.has_data() {
            let j = scheme.interval_index(rec.tod.midpoint_s());
            groups.entry((rec.route_id.clone(), rec.date, j)).or_default().push(rec);
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((route_id, date, j), recs) in groups {
        let cdfs: Vec<(PiecewiseCdf, u64)> = recs
            .iter()
            .filter_map(|r| r.travel_time_percentiles.as_ref())
            .zip(&recs)
            .map(|(p, r)| (build_cdf(p), r.sample_size as u64))
            .collect();
        let sources: Vec<(&PiecewiseCdf, u64)> = cdfs.iter().map(|(c, w)| (c, *w)).collect();
        let pooled = pool(&sources)?;
        out.push(RouteRecord {
            route_id,
            date,
            tod: scheme.intervals()[j],
            sample_size: recs.iter().map(|r| r.sample_size).sum(),
            full_traversal: recs.iter().all(|r| r.full_traversal),
            covered_distance_m: recs[0].covered_distance_m,
            travel_time_percentiles: pooled.percentiles(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEstimate {
    pub departure_time_s: f64,
    pub summary: SampleSummary,
    pub samples: Vec<f64>,
    pub fcd_sample_size: u64,
    pub warnings: Vec<String>,
}

/// Draws `n_draws` travel times from the route-level distribution of the
/// records whose interval contains the departure time.
pub fn route_based_estimate(
    route: &Route,
    records: &[RouteRecord],
    departure_time_s: f64,
    n_draws: usize,
    seed: u64,
) -> Result<RouteEstimate> {
    if !(0.0..SECONDS_PER_DAY as f64).contains(&departure_time_s) {
        return Err(Error::Precondition(format!(
            "departure {departure_time_s} s outside [0, 86400)"
        )));
    }
    if n_draws == 0 {
        return Err(Error::InvalidParameter("at least one draw is required".into()));
    }
    let matching: Vec<&RouteRecord> = records
        .iter()
        .filter(|r| r.route_id == route.id && r.has_data() && r.tod.contains(departure_time_s))
        .collect();
    if matching.is_empty() {
        return Err(Error::NoData(format!(
            "no route record of {} covers departure {departure_time_s} s",
            route.id
        )));
    }
    let mut warnings = Vec::new();
    let free_flow = route.free_flow_time_s();
    if let Some(short) = matching.iter().find(|r| (r.tod.width_s() as f64) < free_flow) {
        let msg = format!(
            "interval {} ({} s) is shorter than the free-flow travel time of route {} ({:.0} s)",
            short.tod,
            short.tod.width_s(),
            route.id,
            free_flow
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let cdfs: Vec<(PiecewiseCdf, u64)> = matching
        .iter()
        .filter_map(|r| {
            r.travel_time_percentiles
                .as_ref()
                .map(|p| (build_cdf(p), r.sample_size as u64))
        })
        .collect();
    let sources: Vec<(&PiecewiseCdf, u64)> = cdfs.iter().map(|(c, w)| (c, *w)).collect();
    let cdf = pool(&sources)?;

    let mut rng = substream(seed, 0);
    let samples: Vec<f64> = (0..n_draws).map(|_| cdf.inverse(rng.random())).collect();
    Ok(RouteEstimate {
        departure_time_s,
        summary: summarize(&samples)?,
        samples,
        fcd_sample_size: cdfs.iter().map(|(_, w)| w).sum(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::PercentileDistribution;
    use crate::ingestion::TodInterval;

    fn route() -> Route {
        // 28 km at 60 km/h: 28 minutes free flow.
        Route::new("r", [("a", 14_000.0, 60.0), ("b", 14_000.0, 60.0)]).unwrap()
    }

    fn record(start: u32, end: u32, tt: PercentileDistribution, n: u32) -> RouteRecord {
        RouteRecord {
            route_id: "r".into(),
            date: NaiveDate::from_ymd_opt(2016, 2, 29).unwrap(),
            tod: TodInterval::new(start, end).unwrap(),
            sample_size: n,
            full_traversal: true,
            covered_distance_m: 28_000.0,
            travel_time_percentiles: Some(tt),
        }
    }

    #[test]
    fn degenerate_route_distribution() {
        let recs = vec![record(
            6 * 3600,
            10 * 3600,
            PercentileDistribution::constant(1800.0).unwrap(),
            30,
        )];
        let est = route_based_estimate(&route(), &recs, 7.0 * 3600.0, 200, 1).unwrap();
        assert!(est.samples.iter().all(|&s| s == 1800.0));
        assert_eq!(est.summary.std, 0.0);
        assert!(est.warnings.is_empty());
    }

    #[test]
    fn linear_route_distribution_mean() {
        let recs = vec![record(
            6 * 3600,
            10 * 3600,
            PercentileDistribution::linear(1500.0, 2100.0).unwrap(),
            30,
        )];
        let est = route_based_estimate(&route(), &recs, 7.0 * 3600.0, 10_000, 5).unwrap();
        assert!(
            (est.summary.mean - 1800.0).abs() / 1800.0 < 0.01,
            "{}",
            est.summary.mean
        );
    }

    #[test]
    fn short_interval_warns() {
        let recs = vec![record(
            8 * 3600,
            8 * 3600 + 300,
            PercentileDistribution::constant(1700.0).unwrap(),
            5,
        )];
        let est = route_based_estimate(&route(), &recs, 8.0 * 3600.0 + 10.0, 10, 1).unwrap();
        assert_eq!(est.warnings.len(), 1);
        assert!(route_based_estimate(&route(), &recs, 9.0 * 3600.0, 10, 1).is_err());
    }

    #[test]
    fn aggregation_pools_native_records() {
        let recs = [
            record(
                7 * 3600,
                7 * 3600 + 300,
                PercentileDistribution::constant(1600.0).unwrap(),
                10,
            ),
            record(
                8 * 3600,
                8 * 3600 + 300,
                PercentileDistribution::constant(2000.0).unwrap(),
                10,
            ),
            record(
                12 * 3600,
                12 * 3600 + 300,
                PercentileDistribution::constant(1700.0).unwrap(),
                4,
            ),
        ];
        let agg = aggregate_route_records(&recs, &TodScheme::demand_based_5()).unwrap();
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].tod, TodInterval::new(6 * 3600, 10 * 3600).unwrap());
        assert_eq!(agg[0].sample_size, 20);
        let p = agg[0].travel_time_percentiles.unwrap();
        assert_eq!(p.p5(), 1600.0);
        assert_eq!(p.p95(), 2000.0);
        assert_eq!(agg[1].travel_time_percentiles.unwrap().median(), 1700.0);
    }
}
