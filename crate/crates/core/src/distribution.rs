//! Empirical distributions given as 19 percentiles (5th through 95th).
//!
//! A [`PercentileDistribution`] is turned into a sampleable [`PiecewiseCdf`]
//! by linear interpolation between the stored percentiles. The source data
//! carries nothing below the 5th or above the 95th percentile, so both tails
//! are clamped to the boundary values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of stored percentiles (5, 10, ..., 95).
pub const PERCENTILE_COUNT: usize = 19;

/// Cumulative probability of the `k`-th stored percentile, `(k + 1) / 20`.
///
/// Computed by division so that `percentile_level(2) == 0.15` holds exactly.
#[inline]
pub fn percentile_level(k: usize) -> f64 {
    (k + 1) as f64 / 20.0
}

/// All 19 levels, `0.05..=0.95`.
pub fn percentile_levels() -> [f64; PERCENTILE_COUNT] {
    std::array::from_fn(percentile_level)
}

/// 19 values at the 5th, 10th, ..., 95th percentile.
///
/// Values are strictly positive and non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PercentileDistribution {
    values: [f64; PERCENTILE_COUNT],
}

impl PercentileDistribution {
    pub fn new(values: [f64; PERCENTILE_COUNT]) -> Result<Self> {
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidPercentiles {
                    index,
                    reason: format!("value {v} is not strictly positive"),
                });
            }
            if index > 0 && v < values[index - 1] {
                return Err(Error::InvalidPercentiles {
                    index,
                    reason: format!("value {v} is below the previous percentile {}", values[index - 1]),
                });
            }
        }
        Ok(Self { values })
    }

    /// Builds from explicit `(level, value)` pairs, checking the levels too.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() != PERCENTILE_COUNT {
            return Err(Error::InvalidPercentiles {
                index: points.len().min(PERCENTILE_COUNT),
                reason: format!("expected {PERCENTILE_COUNT} points, got {}", points.len()),
            });
        }
        let mut values = [0.0; PERCENTILE_COUNT];
        for (index, &(level, value)) in points.iter().enumerate() {
            if (level - percentile_level(index)).abs() > 1e-9 {
                return Err(Error::InvalidPercentiles {
                    index,
                    reason: format!("level {level} should be {}", percentile_level(index)),
                });
            }
            values[index] = value;
        }
        Self::new(values)
    }

    /// All values equal to `value`.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new([value; PERCENTILE_COUNT])
    }

    /// Values spaced evenly from `p5` to `p95`.
    pub fn linear(p5: f64, p95: f64) -> Result<Self> {
        let step = (p95 - p5) / (PERCENTILE_COUNT - 1) as f64;
        let mut values: [f64; PERCENTILE_COUNT] = std::array::from_fn(|k| p5 + step * k as f64);
        values[PERCENTILE_COUNT - 1] = p95;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64; PERCENTILE_COUNT] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(|(k, &v)| (percentile_level(k), v))
    }

    pub fn p5(&self) -> f64 {
        self.values[0]
    }

    pub fn median(&self) -> f64 {
        self.values[9]
    }

    pub fn p95(&self) -> f64 {
        self.values[PERCENTILE_COUNT - 1]
    }

    /// Maps each value through `f` and re-validates.
    ///
    /// Callers passing a decreasing `f` (speed to travel time) should
    /// reverse the order afterwards with [`Self::reversed_map`].
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.map(f))
    }

    /// Applies a decreasing transform: the `k`-th output percentile is
    /// `f(value at percentile 100 - k)`.
    pub fn reversed_map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(std::array::from_fn(|k| f(self.values[PERCENTILE_COUNT - 1 - k])))
    }
}

impl TryFrom<Vec<f64>> for PercentileDistribution {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        let values: [f64; PERCENTILE_COUNT] = values.try_into().map_err(|v: Vec<f64>| Error::InvalidPercentiles {
            index: v.len().min(PERCENTILE_COUNT),
            reason: format!("expected {PERCENTILE_COUNT} values, got {}", v.len()),
        })?;
        Self::new(values)
    }
}

impl From<PercentileDistribution> for Vec<f64> {
    fn from(d: PercentileDistribution) -> Self {
        d.values.to_vec()
    }
}

/// Piecewise-linear CDF through `(value, probability)` breakpoints, with
/// clamped tails below the first and above the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf {
    values: Vec<f64>,
    probs: Vec<f64>,
}

/// Builds the piecewise-linear CDF through the 19 percentiles.
pub fn build_cdf(dist: &PercentileDistribution) -> PiecewiseCdf {
    PiecewiseCdf {
        values: dist.values.to_vec(),
        probs: percentile_levels().to_vec(),
    }
}

impl From<&PercentileDistribution> for PiecewiseCdf {
    fn from(dist: &PercentileDistribution) -> Self {
        build_cdf(dist)
    }
}

impl PiecewiseCdf {
    /// Degenerate CDF with all mass at `value`.
    pub fn constant(value: f64) -> Result<Self> {
        Ok(build_cdf(&PercentileDistribution::constant(value)?))
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    /// `[min value, max value]`.
    pub fn support(&self) -> (f64, f64) {
        (self.values[0], self.values[self.values.len() - 1])
    }

    pub fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.support();
        lo == hi
    }

    /// The stored percentiles, if this CDF sits on the canonical 19 levels.
    pub fn percentiles(&self) -> Option<PercentileDistribution> {
        let canonical = self.probs.len() == PERCENTILE_COUNT
            && self.probs.iter().enumerate().all(|(k, &p)| p == percentile_level(k));
        if !canonical {
            return None;
        }
        PercentileDistribution::new(self.values.clone().try_into().ok()?).ok()
    }

    /// Inverse CDF. `u` is clamped into `[0, 1]`; levels outside the first
    /// and last breakpoint return the boundary values.
    pub fn inverse(&self, u: f64) -> f64 {
        let n = self.probs.len();
        if u <= self.probs[0] {
            return self.values[0];
        }
        if u >= self.probs[n - 1] {
            return self.values[n - 1];
        }
        // Number of breakpoints with level <= u; at least 1 here.
        let idx = self.probs.partition_point(|&p| p <= u);
        let (p_lo, v_lo) = (self.probs[idx - 1], self.values[idx - 1]);
        if p_lo == u {
            return v_lo;
        }
        let (p_hi, v_hi) = (self.probs[idx], self.values[idx]);
        let t = (u - p_lo) / (p_hi - p_lo);
        (v_lo + t * (v_hi - v_lo)).clamp(v_lo, v_hi)
    }

    /// Inverse-transform sample for a uniform fraction `u` in `[0, 1]`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Precondition(format!("uniform fraction {u} outside [0, 1]")));
        }
        Ok(self.inverse(u))
    }

    /// Sample restricted to the quantile window `[q_lo, q_hi]`.
    pub fn truncated_sample(&self, q_lo: f64, q_hi: f64, u: f64) -> Result<f64> {
        if !(0.0 <= q_lo && q_lo < q_hi && q_hi <= 1.0) {
            return Err(Error::DegenerateWindow { lo: q_lo, hi: q_hi });
        }
        self.sample(q_lo + u * (q_hi - q_lo))
    }

    /// CDF value at `value`.
    ///
    /// Below the support this is 0 and above it 1. Where `value` hits one or
    /// more breakpoints exactly, the midpoint of their probability range is
    /// returned, which is how flat segments get a single answer.
    pub fn quantile_of(&self, value: f64) -> f64 {
        let n = self.values.len();
        if value < self.values[0] {
            return 0.0;
        }
        if value > self.values[n - 1] {
            return 1.0;
        }
        let first = self.values.partition_point(|&v| v < value);
        let past = self.values.partition_point(|&v| v <= value);
        if past > first {
            return 0.5 * (self.probs[first] + self.probs[past - 1]);
        }
        // values[first - 1] < value < values[first]
        let (v_lo, p_lo) = (self.values[first - 1], self.probs[first - 1]);
        let (v_hi, p_hi) = (self.values[first], self.probs[first]);
        let t = (value - v_lo) / (v_hi - v_lo);
        (p_lo + t * (p_hi - p_lo)).clamp(p_lo, p_hi)
    }
}

/// Mean, population standard deviation and empirical percentiles of a
/// sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub percentiles: PercentileDistribution,
}

/// Summarizes strictly positive samples.
///
/// Percentiles use linear interpolation between order statistics at rank
/// `h = (n - 1) p`.
pub fn summarize(samples: &[f64]) -> Result<SampleSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some((i, v)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
        return Err(Error::Precondition(format!(
            "sample {i} = {v} is not a positive finite value"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let n = sorted.len();
    let min = sorted[0];
    let max = sorted[n - 1];
    let mean = (sorted.iter().sum::<f64>() / n as f64).clamp(min, max);
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;

    let percentiles = PercentileDistribution::new(std::array::from_fn(|k| {
        empirical_quantile(&sorted, percentile_level(k))
    }))?;

    Ok(SampleSummary {
        mean,
        std: var.sqrt(),
        count: n,
        percentiles,
    })
}

/// Linear interpolation between order statistics of a sorted slice.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Total number of stratified draws used when pooling distributions.
const POOL_DRAWS: f64 = 4000.0;

/// Pools several distributions into one.
///
/// Each source contributes a number of draws proportional to its weight
/// (its FCD sample size); the draws are stratified quantiles
/// `(j + 0.5) / m`, so the result is deterministic. The pooled percentiles
/// are the empirical percentiles of the merged draws. A single source is
/// returned unchanged.
pub fn pool(sources: &[(&PiecewiseCdf, u64)]) -> Result<PiecewiseCdf> {
    let sources: Vec<_> = sources.iter().filter(|(_, w)| *w > 0).collect();
    match sources.as_slice() {
        [] => Err(Error::NoData("no weighted sources to pool".into())),
        [(only, _)] => Ok((*only).clone()),
        _ => {
            let total: u64 = sources.iter().map(|(_, w)| w).sum();
            let mut draws = Vec::new();
            for (cdf, weight) in &sources {
                let m = ((POOL_DRAWS * *weight as f64 / total as f64).round() as usize).max(1);
                draws.extend((0..m).map(|j| cdf.inverse((j as f64 + 0.5) / m as f64)));
            }
            draws.sort_by(f64::total_cmp);
            let pooled =
                PercentileDistribution::new(std::array::from_fn(|k| empirical_quantile(&draws, percentile_level(k))))?;
            Ok(build_cdf(&pooled))
        }
    }
}
