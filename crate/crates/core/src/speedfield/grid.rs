use std::io::Write;

use super::{AsmParams, Measurement, SpeedField};
use crate::error::{Error, Result};
use crate::parallel::Execution;

pub const DEFAULT_CELL_BUDGET: usize = 5_000_000;

/// Cached field values at cell centers, stored time-major
/// (`index = time_index * positions.len() + position_index`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dx_m: f64,
    pub dt_s: f64,
    pub positions: Vec<f64>,
    pub times: Vec<f64>,
    pub speeds: Vec<f64>,
    pub congestion: Vec<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn speed(&self, time_index: usize, position_index: usize) -> f64 {
        self.speeds[time_index * self.positions.len() + position_index]
    }

    pub fn congestion(&self, time_index: usize, position_index: usize) -> f64 {
        self.congestion[time_index * self.positions.len() + position_index]
    }

    /// `(x, t, speed)` for every cell, time-major.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.times.iter().enumerate().flat_map(move |(it, &t)| {
            self.positions
                .iter()
                .enumerate()
                .map(move |(ix, &x)| (x, t, self.speed(it, ix)))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    /// Spatial range, defaults to the measurement extent.
    pub x_range: Option<(f64, f64)>,
    /// Temporal range, defaults to the measurement extent.
    pub t_range: Option<(f64, f64)>,
    pub cell_budget: usize,
    pub execution: Execution,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            x_range: None,
            t_range: None,
            cell_budget: DEFAULT_CELL_BUDGET,
            execution: Execution::default(),
        }
    }
}

fn centers(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    (0..n).map(|i| lo + (i as f64 + 0.5) * step).collect()
}

/// Evaluates the field at every cell center of a `dx` by `dt` grid over the
/// measurement extent.
pub fn reconstruct_grid(measurements: Vec<Measurement>, params: AsmParams, dx: f64, dt: f64) -> Result<SpeedField> {
    reconstruct_grid_with(measurements, params, dx, dt, &GridOptions::default())
}

pub fn reconstruct_grid_with(
    measurements: Vec<Measurement>,
    params: AsmParams,
    dx: f64,
    dt: f64,
    options: &GridOptions,
) -> Result<SpeedField> {
    if !(dx > 0.0 && dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid steps must be positive: dx = {dx}, dt = {dt}"
        )));
    }
    let mut field = SpeedField::new(measurements, params)?;
    let (x_lo, x_hi) = options.x_range.unwrap_or(field.x_extent());
    let (t_lo, t_hi) = options.t_range.unwrap_or(field.t_extent());
    if !(x_hi > x_lo && t_hi > t_lo) {
        return Err(Error::InvalidParameter(format!(
            "empty grid range x [{x_lo}, {x_hi}], t [{t_lo}, {t_hi}]"
        )));
    }
    let nx = ((x_hi - x_lo) / dx).ceil().max(1.0);
    let nt = ((t_hi - t_lo) / dt).ceil().max(1.0);
    if nx * nt > options.cell_budget as f64 {
        return Err(Error::GridTooLarge {
            cells: (nx * nt).min(usize::MAX as f64) as usize,
            budget: options.cell_budget,
        });
    }
    let positions = centers(x_lo, x_hi, dx);
    let times = centers(t_lo, t_hi, dt);
    let nx = positions.len();

    let points = options.execution.map(nx * times.len(), |c| {
        field.evaluate_point(positions[c % nx], times[c / nx])
    });
    let grid = Grid {
        dx_m: dx,
        dt_s: dt,
        speeds: points.iter().map(|p| p.speed).collect(),
        congestion: points.iter().map(|p| p.congestion).collect(),
        positions,
        times,
    };
    field.set_grid(grid);
    Ok(field)
}

/// Writes `x_m,t_s,speed_kmh` rows after a `#`-prefixed header block of
/// `key = value` lines.
pub fn write_grid<W: Write>(field: &SpeedField, header: &[(String, String)], out: &mut W) -> std::io::Result<()> {
    let grid = field
        .grid()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "field has no cached grid"))?;
    let p = field.params();
    writeln!(out, "# c_free_kmh = {}", p.c_free_kmh)?;
    writeln!(out, "# c_cong_kmh = {}", p.c_cong_kmh)?;
    writeln!(out, "# v_c_kmh = {}", p.v_c_kmh)?;
    writeln!(out, "# delta_v_kmh = {}", p.delta_v_kmh)?;
    writeln!(out, "# dx_m = {}", grid.dx_m)?;
    writeln!(out, "# dt_s = {}", grid.dt_s)?;
    for (k, v) in header {
        writeln!(out, "# {k} = {v}")?;
    }
    writeln!(out, "x_m,t_s,speed_kmh")?;
    for (x, t, v) in grid.cells() {
        writeln!(out, "{x:.1},{t:.1},{v:.4}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker(n: usize) -> Vec<Measurement> {
        (0..n)
            .flat_map(|i| {
                (0..n).map(move |j| {
                    Measurement::new(
                        500.0 + 1000.0 * i as f64,
                        150.0 + 300.0 * j as f64,
                        if (i + j) % 3 == 0 { 30.0 } else { 100.0 },
                        500.0,
                        150.0,
                    )
                    .unwrap()
                })
            })
            .collect()
    }

    #[test]
    fn single_measurement_fills_grid() {
        let m = Measurement::new(500.0, 150.0, 77.0, 500.0, 150.0).unwrap();
        let f = reconstruct_grid(vec![m], AsmParams::default(), 100.0, 30.0).unwrap();
        let g = f.grid().unwrap();
        assert_eq!(g.positions.len(), 10);
        assert_eq!(g.times.len(), 10);
        assert!(g.speeds.iter().all(|&v| v == 77.0));
    }

    #[test]
    fn serial_and_parallel_grids_are_identical() {
        let seq = GridOptions {
            execution: Execution::Sequential,
            ..GridOptions::default()
        };
        let par = GridOptions {
            execution: Execution::Parallel,
            ..GridOptions::default()
        };
        let a = reconstruct_grid_with(checker(8), AsmParams::default(), 250.0, 60.0, &seq).unwrap();
        let b = reconstruct_grid_with(checker(8), AsmParams::default(), 250.0, 60.0, &par).unwrap();
        let bits = |f: &SpeedField| f.grid().unwrap().speeds.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn budget_is_enforced() {
        let opts = GridOptions {
            cell_budget: 100,
            ..GridOptions::default()
        };
        assert!(matches!(
            reconstruct_grid_with(checker(4), AsmParams::default(), 10.0, 10.0, &opts),
            Err(Error::GridTooLarge { .. })
        ));
        assert!(reconstruct_grid(checker(2), AsmParams::default(), 0.0, 10.0).is_err());
    }

    #[test]
    fn export_has_header_and_rows() {
        let f = reconstruct_grid(checker(2), AsmParams::default(), 1000.0, 300.0).unwrap();
        let mut out = Vec::new();
        write_grid(&f, &[("route".into(), "r".into())], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("# c_free_kmh = 70\n# c_cong_kmh = -15\n# v_c_kmh = 50\n# delta_v_kmh = 10\n"));
        assert!(text.contains("# route = r\nx_m,t_s,speed_kmh\n"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
    }
}
