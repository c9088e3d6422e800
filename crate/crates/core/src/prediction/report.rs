use std::io::Write;

use super::{ComparisonReport, Forecast};
use crate::ingestion::SchemeKind;

/// One line of the forecast table; reference rows carry no comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub strategy: String,
    pub range_days: usize,
    pub scheme: SchemeKind,
    pub mean_tt_min: f64,
    pub std_tt_min: f64,
    pub underlying_fcd_sample_size: u64,
    pub comparison: Option<ComparisonReport>,
}

impl ForecastRow {
    /// Row for `forecast` labelled `strategy`; seconds become minutes.
    pub fn from_forecast(
        strategy: impl Into<String>,
        forecast: &Forecast,
        comparison: Option<ComparisonReport>,
    ) -> Self {
        Self {
            strategy: strategy.into(),
            range_days: forecast.days.len(),
            scheme: forecast.scheme,
            mean_tt_min: forecast.summary.mean / 60.0,
            std_tt_min: forecast.summary.std / 60.0,
            underlying_fcd_sample_size: forecast.fcd_sample_size,
            comparison,
        }
    }
}

fn z_text(z: f64) -> String {
    if z.is_infinite() {
        "inf".into()
    } else {
        format!("{z:.2}")
    }
}

/// Writes `#`-prefixed `key = value` header lines followed by CSV rows with
/// two decimals. Comparisons hold seconds and are printed in minutes.
pub fn write_forecast_report<W: Write>(
    rows: &[ForecastRow],
    header: &[(String, String)],
    out: &mut W,
) -> std::io::Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k} = {v}")?;
    }
    writeln!(
        out,
        "strategy,range_days,scheme,mean_tt_min,std_tt_min,underlying_fcd_sample_size,reference_mean_tt_min,mean_error_min,z_score,overlap"
    )?;
    for row in rows {
        write!(
            out,
            "{},{},{},{:.2},{:.2},{}",
            row.strategy, row.range_days, row.scheme, row.mean_tt_min, row.std_tt_min, row.underlying_fcd_sample_size
        )?;
        match &row.comparison {
            Some(c) => writeln!(
                out,
                ",{:.2},{:.2},{},{}",
                c.reference.mean / 60.0,
                c.mean_error / 60.0,
                z_text(c.z_score),
                c.overlap
            )?,
            None => writeln!(out, ",,,,")?,
        }
    }
    Ok(())
}
