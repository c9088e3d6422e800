//! Continuous speed field `V(x, t)` from discrete median-speed measurements.
//!
//! Two anisotropic kernel smoothings are computed, one along the free-flow
//! characteristic (`c_free`, downstream) and one along the congested
//! characteristic (`c_cong`, upstream):
//!
//! ```text
//! V_c(x, t) = sum_i phi(x - x_i, t - t_i - (x - x_i) / c) v_i / sum_i phi(...)
//! phi(dx, dt) = exp(-(|dx| / sigma_i + |dt| / tau_i))
//! ```
//!
//! and blended by the degree of congestion
//! `w = (1 + tanh((v_c - min(V_free, V_cong)) / delta_v)) / 2` into
//! `V = w V_cong + (1 - w) V_free`.
//!
//! Positions are meters and times seconds internally; speeds and
//! propagation velocities are km/h at the API boundary.

mod grid;
mod trajectory;

pub use grid::{reconstruct_grid, reconstruct_grid_with, write_grid, Grid, GridOptions, DEFAULT_CELL_BUDGET};
pub use trajectory::{virtual_trajectory, virtual_trajectory_with, Trajectory, TrajectoryOptions};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{kmh_to_ms, Dataset, Route};

/// Weights below this fraction of the largest weight at a point are skipped.
pub const DEFAULT_WEIGHT_CUTOFF: f64 = 1e-8;

/// One median-speed observation, placed at the link midpoint and the middle
/// of its time-of-day interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub position_m: f64,
    pub time_s: f64,
    pub speed_kmh: f64,
    /// Spatial smoothing width, half the link length.
    pub sigma_m: f64,
    /// Temporal smoothing width, half the interval width.
    pub tau_s: f64,
}

impl Measurement {
    pub fn new(position_m: f64, time_s: f64, speed_kmh: f64, sigma_m: f64, tau_s: f64) -> Result<Self> {
        let m = Self {
            position_m,
            time_s,
            speed_kmh,
            sigma_m,
            tau_s,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_m > 0.0 && self.tau_s > 0.0 && self.speed_kmh > 0.0)
            || !(self.position_m.is_finite() && self.time_s.is_finite() && self.speed_kmh.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "measurement needs positive sigma, tau and speed: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Measurements for every observed link of `route` on `date`, using the
/// median (50th percentile) speed of each record.
pub fn measurements_from_records(dataset: &Dataset, route: &Route, date: NaiveDate) -> Vec<Measurement> {
    let mut out = Vec::new();
    for link in route.links() {
        for rec in dataset.link_records_on(&link.id, date) {
            if let Some(speed) = rec.speed_percentiles.filter(|_| rec.has_data()) {
                out.push(Measurement {
                    position_m: link.midpoint_m,
                    time_s: rec.tod.midpoint_s(),
                    speed_kmh: speed.median(),
                    sigma_m: link.length_m / 2.0,
                    tau_s: rec.tod.width_s() as f64 / 2.0,
                });
            }
        }
    }
    out
}

/// Smoothing parameters; defaults are 70, -15, 50 and 10 km/h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsmParams {
    pub c_free_kmh: f64,
    pub c_cong_kmh: f64,
    pub v_c_kmh: f64,
    pub delta_v_kmh: f64,
}

impl Default for AsmParams {
    fn default() -> Self {
        Self {
            c_free_kmh: 70.0,
            c_cong_kmh: -15.0,
            v_c_kmh: 50.0,
            delta_v_kmh: 10.0,
        }
    }
}

impl AsmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_free_kmh > 0.0 && self.c_cong_kmh < 0.0 && self.delta_v_kmh > 0.0) || !self.v_c_kmh.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameters need c_free > 0 > c_cong and delta_v > 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// `exp(-(|dx| / sigma + |dt| / tau))`.
#[inline]
pub fn kernel_weight(dx: f64, dt: f64, sigma: f64, tau: f64) -> f64 {
    (-(dx.abs() / sigma + dt.abs() / tau)).exp()
}

/// Kernel exponent of measurement `m` at `(x, t)` for a characteristic of
/// `c_ms` meters per second.
#[inline]
fn exponent(m: &Measurement, c_ms: f64, x: f64, t: f64) -> f64 {
    let dx = x - m.position_m;
    let dt = t - m.time_s - dx / c_ms;
    dx.abs() / m.sigma_m + dt.abs() / m.tau_s
}

/// Weighted mean of the measurement speeds along one characteristic.
///
/// Weights are taken relative to the largest one so that points far from
/// all data still get a finite answer; measurements whose relative weight
/// is below `cutoff` are skipped. The mean is accumulated as an offset from
/// the first included speed, which makes constant inputs reproduce exactly.
fn smoothed(measurements: &[Measurement], c_ms: f64, x: f64, t: f64, cutoff: f64) -> f64 {
    let e_min = measurements
        .iter()
        .map(|m| exponent(m, c_ms, x, t))
        .fold(f64::INFINITY, f64::min);
    let limit = if cutoff > 0.0 { -cutoff.ln() } else { f64::INFINITY };

    let mut reference = f64::NAN;
    let mut norm = 0.0;
    let mut acc = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in measurements {
        let rel = exponent(m, c_ms, x, t) - e_min;
        if rel > limit {
            continue;
        }
        let w = (-rel).exp();
        if reference.is_nan() {
            reference = m.speed_kmh;
        }
        norm += w;
        acc += w * (m.speed_kmh - reference);
        lo = lo.min(m.speed_kmh);
        hi = hi.max(m.speed_kmh);
    }
    (reference + acc / norm).clamp(lo, hi)
}

/// Smoothed speed along the characteristic `c_kmh` at `(x, t)`, with no
/// weight cutoff.
pub fn component_field(measurements: &[Measurement], c_kmh: f64, x: f64, t: f64) -> Result<f64> {
    if measurements.is_empty() {
        return Err(Error::NoData("no measurements to smooth".into()));
    }
    if c_kmh == 0.0 || !c_kmh.is_finite() {
        return Err(Error::InvalidParameter(format!("propagation velocity {c_kmh} km/h")));
    }
    Ok(smoothed(measurements, kmh_to_ms(c_kmh), x, t, 0.0))
}

/// Degree of congestion in `[0, 1]`, non-increasing in the smaller of the
/// two component speeds.
pub fn congestion_weight(v_free: f64, v_cong: f64, params: &AsmParams) -> f64 {
    0.5 * (1.0 + ((params.v_c_kmh - v_free.min(v_cong)) / params.delta_v_kmh).tanh())
}

/// Both components, their blend weight and the resulting speed at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub v_free: f64,
    pub v_cong: f64,
    pub congestion: f64,
    pub speed: f64,
    /// The point lies outside the span covered by the measurements.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedField {
    measurements: Vec<Measurement>,
    params: AsmParams,
    c_free_ms: f64,
    c_cong_ms: f64,
    weight_cutoff: f64,
    x_extent: (f64, f64),
    t_extent: (f64, f64),
    grid: Option<Grid>,
}

impl SpeedField {
    pub fn new(measurements: Vec<Measurement>, params: AsmParams) -> Result<Self> {
        params.validate()?;
        if measurements.is_empty() {
            return Err(Error::NoData("no measurements to smooth".into()));
        }
        for m in &measurements {
            m.validate()?;
        }
        let x_extent = measurements
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                (lo.min(m.position_m - m.sigma_m), hi.max(m.position_m + m.sigma_m))
            });
        let t_extent = measurements
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
                (lo.min(m.time_s - m.tau_s), hi.max(m.time_s + m.tau_s))
            });
        Ok(Self {
            measurements,
            params,
            c_free_ms: kmh_to_ms(params.c_free_kmh),
            c_cong_ms: kmh_to_ms(params.c_cong_kmh),
            weight_cutoff: DEFAULT_WEIGHT_CUTOFF,
            x_extent,
            t_extent,
            grid: None,
        })
    }

    /// Relative weight below which measurements are ignored; 0 disables the
    /// cutoff.
    pub fn with_weight_cutoff(mut self, cutoff: f64) -> Self {
        self.weight_cutoff = cutoff.max(0.0);
        self
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn params(&self) -> &AsmParams {
        &self.params
    }

    /// Spatial span covered by the measurements, meters.
    pub fn x_extent(&self) -> (f64, f64) {
        self.x_extent
    }

    /// Temporal span covered by the measurements, seconds.
    pub fn t_extent(&self) -> (f64, f64) {
        self.t_extent
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub(crate) fn set_grid(&mut self, grid: Grid) {
        self.grid = Some(grid);
    }

    /// Smallest temporal smoothing width among the measurements.
    pub fn min_tau_s(&self) -> f64 {
        self.measurements.iter().map(|m| m.tau_s).fold(f64::INFINITY, f64::min)
    }

    pub fn is_extrapolated(&self, x: f64, t: f64) -> bool {
        x < self.x_extent.0 || x > self.x_extent.1 || t < self.t_extent.0 || t > self.t_extent.1
    }

    pub fn evaluate_point(&self, x: f64, t: f64) -> FieldPoint {
        let v_free = smoothed(&self.measurements, self.c_free_ms, x, t, self.weight_cutoff);
        let v_cong = smoothed(&self.measurements, self.c_cong_ms, x, t, self.weight_cutoff);
        let w = congestion_weight(v_free, v_cong, &self.params);
        let speed = (v_free + w * (v_cong - v_free)).clamp(v_free.min(v_cong), v_free.max(v_cong));
        FieldPoint {
            v_free,
            v_cong,
            congestion: w,
            speed,
            extrapolated: self.is_extrapolated(x, t),
        }
    }

    /// `V(x, t)` in km/h.
    pub fn evaluate(&self, x: f64, t: f64) -> f64 {
        self.evaluate_point(x, t).speed
    }
}
