use std::io::Write;

use crate::distribution::{SampleSummary, PERCENTILE_COUNT};

/// One row of an estimation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRow {
    pub departure_time_s: f64,
    pub scheme: String,
    pub alpha: f64,
    pub summary: SampleSummary,
}

/// Writes `#`-prefixed `key = value` header lines followed by CSV rows.
pub fn write_estimation_report<W: Write>(
    rows: &[EstimationRow],
    header: &[(String, String)],
    out: &mut W,
) -> std::io::Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k} = {v}")?;
    }
    write!(out, "departure_time_s,scheme,alpha,mean_tt_s,std_tt_s")?;
    for k in 0..PERCENTILE_COUNT {
        write!(out, ",p{:02}", 5 * (k + 1))?;
    }
    writeln!(out)?;
    for row in rows {
        write!(
            out,
            "{:.0},{},{},{:.3},{:.3}",
            row.departure_time_s, row.scheme, row.alpha, row.summary.mean, row.summary.std
        )?;
        for v in row.summary.percentiles.values() {
            write!(out, ",{v:.3}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::summarize;

    #[test]
    fn columns() {
        let row = EstimationRow {
            departure_time_s: 28_800.0,
            scheme: "5min".into(),
            alpha: 0.5,
            summary: summarize(&[100.0, 200.0]).unwrap(),
        };
        let mut out = Vec::new();
        write_estimation_report(&[row], &[("runs".into(), "500".into())], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# runs = 500");
        assert!(lines[1].starts_with("departure_time_s,scheme,alpha,mean_tt_s,std_tt_s,p05,p10,"));
        assert!(lines[1].ends_with(",p95"));
        assert!(lines[2].starts_with("28800,5min,0.5,150.000,50.000,105.000,"));
        assert_eq!(lines[2].split(',').count(), 5 + 19);
    }
}
