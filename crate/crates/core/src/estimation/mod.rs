//! Link travel-time matrix and Monte Carlo trip simulation.
//!
//! For short time-of-day intervals the travel time of a trip is the sum of
//! link travel times, each drawn from the cell of the interval in which the
//! vehicle enters the link. Only the first link is sampled freely; every
//! later speed is drawn inside a quantile window of half-width `alpha`
//! around the quantile that the previous speed has in the next link's
//! distribution. `alpha = 1` makes the window cover `[0, 1]`, i.e. links are
//! independent; small values keep a vehicle at a similar relative speed
//! along the route.
//!
//! Long intervals use the route-level distribution directly, see
//! [`route_based_estimate`].

mod report;
mod route;

pub use report::{write_estimation_report, EstimationRow};
pub use route::{aggregate_route_records, route_based_estimate, RouteEstimate};

use chrono::NaiveDate;
use rand::Rng;

use crate::distribution::{build_cdf, pool, summarize, PiecewiseCdf, SampleSummary};
use crate::error::{Error, Result};
use crate::ingestion::{kmh_to_ms, Dataset, Route, TodScheme, SECONDS_PER_DAY};
use crate::parallel::Execution;
use crate::rng::substream;

/// One entry of the travel-time matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Speed distribution pooled from FCD records, km/h.
    Observed { cdf: PiecewiseCdf, sample_size: u64 },
    /// No data: the link is assumed to be driven at its speed limit.
    FreeFlowFallback { speed_limit_kmh: f64 },
}

impl Cell {
    pub fn is_fallback(&self) -> bool {
        matches!(self, Cell::FreeFlowFallback { .. })
    }

    pub fn sample_size(&self) -> u64 {
        match self {
            Cell::Observed { sample_size, .. } => *sample_size,
            Cell::FreeFlowFallback { .. } => 0,
        }
    }

    pub fn sample(&self, u: f64) -> Result<f64> {
        match self {
            Cell::Observed { cdf, .. } => cdf.sample(u),
            Cell::FreeFlowFallback { speed_limit_kmh } => Ok(*speed_limit_kmh),
        }
    }

    pub fn quantile_of(&self, speed_kmh: f64) -> f64 {
        match self {
            Cell::Observed { cdf, .. } => cdf.quantile_of(speed_kmh),
            Cell::FreeFlowFallback { speed_limit_kmh } => {
                if speed_kmh < *speed_limit_kmh {
                    0.0
                } else if speed_kmh > *speed_limit_kmh {
                    1.0
                } else {
                    0.5
                }
            }
        }
    }

    pub fn truncated_sample(&self, q_lo: f64, q_hi: f64, u: f64) -> Result<f64> {
        match self {
            Cell::Observed { cdf, .. } => cdf.truncated_sample(q_lo, q_hi, u),
            Cell::FreeFlowFallback { speed_limit_kmh } => {
                if !(0.0 <= q_lo && q_lo < q_hi && q_hi <= 1.0) {
                    return Err(Error::DegenerateWindow { lo: q_lo, hi: q_hi });
                }
                Ok(*speed_limit_kmh)
            }
        }
    }
}

/// Links by time-of-day intervals grid of speed distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelTimeMatrix {
    route: Route,
    scheme: TodScheme,
    /// Link-major: `cells[link * intervals + interval]`.
    cells: Vec<Cell>,
}

impl TravelTimeMatrix {
    /// Builds a matrix from explicit cells, link-major.
    pub fn from_cells(route: Route, scheme: TodScheme, cells: Vec<Cell>) -> Result<Self> {
        if scheme.is_empty() {
            return Err(Error::InvalidParameter("empty time-of-day scheme".into()));
        }
        if cells.len() != route.links().len() * scheme.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} cells, got {}",
                route.links().len() * scheme.len(),
                cells.len()
            )));
        }
        Ok(Self { route, scheme, cells })
    }

    /// Matrix with the same distribution in every interval of each link.
    pub fn time_invariant(route: Route, scheme: TodScheme, per_link: Vec<Cell>) -> Result<Self> {
        let n = scheme.len();
        let cells = per_link.into_iter().flat_map(|c| std::iter::repeat_n(c, n)).collect();
        Self::from_cells(route, scheme, cells)
    }

    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn scheme(&self) -> &TodScheme {
        &self.scheme
    }

    pub fn cell(&self, link: usize, interval: usize) -> &Cell {
        &self.cells[link * self.scheme.len() + interval]
    }

    /// Cell of `link` for the interval containing `t` (wrapped onto a day).
    pub fn cell_at(&self, link: usize, t: f64) -> &Cell {
        self.cell(link, self.scheme.interval_index(t))
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn fallback_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_fallback()).count()
    }

    /// Median over links of the FCD sample size in the interval containing
    /// `t`.
    pub fn median_sample_size_at(&self, t: f64) -> u64 {
        let mut sizes: Vec<u64> = (0..self.route.links().len())
            .map(|i| self.cell_at(i, t).sample_size())
            .collect();
        sizes.sort_unstable();
        sizes[sizes.len() / 2]
    }
}

/// Builds the matrix of `route` for `scheme` from the records on `dates`.
///
/// Native records are assigned to the scheme interval containing their
/// midpoint; all records of a cell across the dates are pooled weighted by
/// sample size. Cells without any data fall back to the speed limit.
pub fn build_matrix(
    dataset: &Dataset,
    route: &Route,
    scheme: &TodScheme,
    dates: &[NaiveDate],
) -> Result<TravelTimeMatrix> {
    if scheme.is_empty() {
        return Err(Error::InvalidParameter("empty time-of-day scheme".into()));
    }
    if dates.is_empty() {
        return Err(Error::InvalidParameter("no dates to build the matrix from".into()));
    }
    if dataset.routes().next().is_some() {
        for link in route.links() {
            if !dataset.routes().any(|r| r.link(&link.id).is_some()) {
                return Err(Error::UnknownLink(link.id.clone()));
            }
        }
    }
    let mut dates = dates.to_vec();
    dates.sort();
    dates.dedup();

    let n = scheme.len();
    let mut cells = Vec::with_capacity(route.links().len() * n);
    for link in route.links() {
        let mut bins: Vec<Vec<(PiecewiseCdf, u64)>> = vec![Vec::new(); n];
        for &date in &dates {
            for rec in dataset.link_records_on(&link.id, date) {
                if let (true, Some(speed)) = (rec.has_data(), rec.speed_percentiles) {
                    bins[scheme.interval_index(rec.tod.midpoint_s())].push((build_cdf(&speed), rec.sample_size as u64));
                }
            }
        }
        for bin in bins {
            let cell = if bin.is_empty() {
                Cell::FreeFlowFallback {
                    speed_limit_kmh: link.speed_limit_kmh,
                }
            } else {
                let sources: Vec<(&PiecewiseCdf, u64)> = bin.iter().map(|(c, w)| (c, *w)).collect();
                Cell::Observed {
                    cdf: pool(&sources)?,
                    sample_size: bin.iter().map(|(_, w)| w).sum(),
                }
            };
            cells.push(cell);
        }
    }
    TravelTimeMatrix::from_cells(route.clone(), scheme.clone(), cells)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// Half-width of the quantile window, in `(0, 1]`.
    pub alpha: f64,
    pub n_runs: usize,
    pub seed: u64,
}

pub const DEFAULT_RUNS: usize = 500;

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            n_runs: DEFAULT_RUNS,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn new(alpha: f64, n_runs: usize, seed: u64) -> Result<Self> {
        let c = Self { alpha, n_runs, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must lie in (0, 1]",
                self.alpha
            )));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidParameter("at least one run is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTraversal {
    pub entry_time_s: f64,
    pub speed_kmh: f64,
    pub link_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripResult {
    pub departure_time_s: f64,
    pub travel_time_s: f64,
    pub trace: Vec<LinkTraversal>,
}

/// One simulated trip. Run `r` draws from random substream `r` of the
/// configured seed, one uniform per link.
pub fn simulate_trip(
    matrix: &TravelTimeMatrix,
    departure_time_s: f64,
    config: &SimulationConfig,
    run_index: usize,
) -> Result<TripResult> {
    config.validate()?;
    if !(0.0..SECONDS_PER_DAY as f64).contains(&departure_time_s) {
        return Err(Error::Precondition(format!(
            "departure {departure_time_s} s outside [0, 86400)"
        )));
    }
    if run_index >= config.n_runs {
        return Err(Error::Precondition(format!(
            "run {run_index} outside 0..{}",
            config.n_runs
        )));
    }
    let mut rng = substream(config.seed, run_index as u64);
    let mut trace = Vec::with_capacity(matrix.route.links().len());
    let mut t = departure_time_s;
    let mut previous: Option<f64> = None;
    for (i, link) in matrix.route.links().iter().enumerate() {
        let cell = matrix.cell_at(i, t);
        let u: f64 = rng.random();
        let speed = match previous {
            None => cell.sample(u)?,
            Some(prev) => {
                let q = cell.quantile_of(prev);
                let lo = (q - config.alpha).max(0.0);
                let hi = (q + config.alpha).min(1.0);
                cell.truncated_sample(lo, hi, u)?
            }
        };
        let link_time_s = link.length_m / kmh_to_ms(speed);
        trace.push(LinkTraversal {
            entry_time_s: t,
            speed_kmh: speed,
            link_time_s,
        });
        t += link_time_s;
        previous = Some(speed);
    }
    Ok(TripResult {
        departure_time_s,
        travel_time_s: trace.iter().map(|l| l.link_time_s).sum(),
        trace,
    })
}

/// Travel-time samples and their summary for one departure time.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub departure_time_s: f64,
    pub summary: SampleSummary,
    /// Raw travel times in run order, seconds.
    pub samples: Vec<f64>,
    /// FCD sample size behind the estimate.
    pub fcd_sample_size: u64,
}

pub fn estimate_distribution(
    matrix: &TravelTimeMatrix,
    departure_time_s: f64,
    config: &SimulationConfig,
) -> Result<Estimate> {
    estimate_distribution_with(matrix, departure_time_s, config, Execution::default())
}

/// Runs `config.n_runs` independent trips; output does not depend on
/// `execution`.
pub fn estimate_distribution_with(
    matrix: &TravelTimeMatrix,
    departure_time_s: f64,
    config: &SimulationConfig,
    execution: Execution,
) -> Result<Estimate> {
    config.validate()?;
    let samples = execution.try_map(config.n_runs, |r| {
        simulate_trip(matrix, departure_time_s, config, r).map(|trip| trip.travel_time_s)
    })?;
    Ok(Estimate {
        departure_time_s,
        summary: summarize(&samples)?,
        samples,
        fcd_sample_size: matrix.median_sample_size_at(departure_time_s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::PercentileDistribution;

    fn route(lengths: &[f64], limit: f64) -> Route {
        Route::new(
            "r",
            lengths.iter().enumerate().map(|(i, &l)| (format!("L{i}"), l, limit)),
        )
        .unwrap()
    }

    fn observed(p5: f64, p95: f64) -> Cell {
        Cell::Observed {
            cdf: build_cdf(&PercentileDistribution::linear(p5, p95).unwrap()),
            sample_size: 10,
        }
    }

    #[test]
    fn fallback_single_link() {
        let m = TravelTimeMatrix::time_invariant(
            route(&[10_000.0], 100.0),
            TodScheme::fixed_5min(),
            vec![Cell::FreeFlowFallback { speed_limit_kmh: 100.0 }],
        )
        .unwrap();
        for alpha in [0.05, 0.5, 1.0] {
            let cfg = SimulationConfig::new(alpha, 3, 1).unwrap();
            let trip = simulate_trip(&m, 8.0 * 3600.0, &cfg, 2).unwrap();
            assert_eq!(trip.travel_time_s, 360.0);
        }
    }

    #[test]
    fn two_degenerate_links() {
        let cell = Cell::Observed {
            cdf: PiecewiseCdf::constant(60.0).unwrap(),
            sample_size: 3,
        };
        let m = TravelTimeMatrix::time_invariant(
            route(&[1000.0, 1000.0], 100.0),
            TodScheme::fixed_20min(),
            vec![cell.clone(), cell],
        )
        .unwrap();
        let cfg = SimulationConfig::new(0.3, 50, 4).unwrap();
        let est = estimate_distribution(&m, 100.0, &cfg).unwrap();
        assert!(est.samples.iter().all(|&s| (s - 120.0).abs() < 1e-9));
        assert_eq!(est.summary.std, 0.0);
    }

    #[test]
    fn trace_is_additive_and_ordered() {
        let m = TravelTimeMatrix::time_invariant(
            route(&[800.0, 1500.0, 600.0, 2000.0], 120.0),
            TodScheme::fixed_5min(),
            vec![
                observed(40.0, 110.0),
                observed(20.0, 90.0),
                observed(60.0, 100.0),
                observed(30.0, 130.0),
            ],
        )
        .unwrap();
        let cfg = SimulationConfig::new(0.2, 100, 8).unwrap();
        for r in 0..100 {
            let trip = simulate_trip(&m, 86_000.0, &cfg, r).unwrap();
            let sum: f64 = trip.trace.iter().map(|l| l.link_time_s).sum();
            assert_eq!(trip.travel_time_s, sum);
            assert!(trip.trace.windows(2).all(|w| w[1].entry_time_s > w[0].entry_time_s));
        }
    }

    #[test]
    fn window_follows_previous_quantile() {
        // Identical distributions: with a tiny alpha the quantile barely moves.
        let m = TravelTimeMatrix::time_invariant(
            route(&[1000.0; 6], 120.0),
            TodScheme::fixed_5min(),
            vec![observed(40.0, 120.0); 6],
        )
        .unwrap();
        let cfg = SimulationConfig::new(0.01, 20, 3).unwrap();
        for r in 0..20 {
            let trip = simulate_trip(&m, 0.0, &cfg, r).unwrap();
            for w in trip.trace.windows(2) {
                // 1% of quantile range = 0.01 / 0.9 * 80 km/h, roughly 0.9 km/h.
                assert!((w[1].speed_kmh - w[0].speed_kmh).abs() <= 0.9, "{w:?}");
            }
        }
    }

    #[test]
    fn preconditions() {
        let m = TravelTimeMatrix::time_invariant(
            route(&[1000.0], 100.0),
            TodScheme::fixed_5min(),
            vec![observed(50.0, 60.0)],
        )
        .unwrap();
        let cfg = SimulationConfig::new(1.0, 2, 0).unwrap();
        assert!(simulate_trip(&m, 86_400.0, &cfg, 0).is_err());
        assert!(simulate_trip(&m, 0.0, &cfg, 2).is_err());
        assert!(SimulationConfig::new(0.0, 1, 0).is_err());
        assert!(SimulationConfig::new(1.5, 1, 0).is_err());
        assert!(SimulationConfig::new(0.5, 0, 0).is_err());
        assert!(TravelTimeMatrix::from_cells(route(&[1.0], 1.0), TodScheme::fixed_5min(), vec![]).is_err());
    }

    #[test]
    fn late_departures_wrap_to_the_next_day() {
        // Night cell slow, everything else fast: a trip starting just before
        // midnight that crosses it re-enters interval 0.
        let scheme = TodScheme::fixed_5min();
        let mut cells = Vec::new();
        for _ in 0..2 {
            for j in 0..scheme.len() {
                cells.push(Cell::FreeFlowFallback {
                    speed_limit_kmh: if j == 0 { 36.0 } else { 72.0 },
                });
            }
        }
        let m = TravelTimeMatrix::from_cells(route(&[6000.0, 1000.0], 72.0), scheme, cells).unwrap();
        let cfg = SimulationConfig::new(1.0, 1, 0).unwrap();
        let trip = simulate_trip(&m, 86_300.0, &cfg, 0).unwrap();
        // Link 0 at 20 m/s takes 300 s, link 1 is entered at 86 600 = 00:03:20.
        assert_eq!(trip.trace[1].speed_kmh, 36.0);
        assert!((trip.travel_time_s - 400.0).abs() < 1e-9);
    }

    #[test]
    fn sequential_and_parallel_estimates_match() {
        let m = TravelTimeMatrix::time_invariant(
            route(&[700.0, 1300.0, 900.0], 120.0),
            TodScheme::fixed_5min(),
            vec![observed(30.0, 110.0), observed(50.0, 90.0), observed(20.0, 100.0)],
        )
        .unwrap();
        let cfg = SimulationConfig::new(0.1, 500, 77).unwrap();
        let a = estimate_distribution_with(&m, 3600.0, &cfg, Execution::Sequential).unwrap();
        let b = estimate_distribution_with(&m, 3600.0, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
