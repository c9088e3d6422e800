//! Line-delimited JSON dataset and geometry files.
//!
//! Records file, one object per line:
//!
//! ```text
//! {"record_kind":"link","link_id":"L00","date":"2016-02-01","tod_start_s":0,"tod_end_s":300,
//!  "sample_size":21,"full_traversal":false,"covered_distance_m":950.0,"speed_limit_kmh":120.0,
//!  "speed_percentiles_kmh":[...19 values...],"travel_time_percentiles_s":[...19 values...]}
//! {"record_kind":"route","route_id":"A5S","date":"2016-02-01","tod_start_s":0,"tod_end_s":300,
//!  "sample_size":5,"full_traversal":false,"covered_distance_m":27000.0,"speed_limit_kmh":null,
//!  "speed_percentiles_kmh":null,"travel_time_percentiles_s":[...19 values...]}
//! ```
//!
//! Geometry file, one route per line:
//!
//! ```text
//! {"route_id":"A5S","links":[{"link_id":"L00","length_m":950.0,"speed_limit_kmh":120.0}, ...]}
//! ```
//!
//! Percentile arrays run from the 5th to the 95th percentile. Blank lines
//! are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Dataset, LinkRecord, Route, RouteRecord, TodInterval};
use crate::distribution::PercentileDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RecordKind {
    Link,
    Route,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    record_kind: RecordKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    route_id: Option<String>,
    date: NaiveDate,
    tod_start_s: u32,
    tod_end_s: u32,
    sample_size: u32,
    #[serde(default)]
    full_traversal: bool,
    covered_distance_m: f64,
    #[serde(default)]
    speed_limit_kmh: Option<f64>,
    #[serde(default)]
    speed_percentiles_kmh: Option<PercentileDistribution>,
    #[serde(default)]
    travel_time_percentiles_s: Option<PercentileDistribution>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryLink {
    link_id: String,
    length_m: f64,
    speed_limit_kmh: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryLine {
    route_id: String,
    links: Vec<GeometryLink>,
}

impl From<&LinkRecord> for RecordLine {
    fn from(r: &LinkRecord) -> Self {
        RecordLine {
            record_kind: RecordKind::Link,
            link_id: Some(r.link_id.clone()),
            route_id: None,
            date: r.date,
            tod_start_s: r.tod.start(),
            tod_end_s: r.tod.end(),
            sample_size: r.sample_size,
            full_traversal: r.full_traversal,
            covered_distance_m: r.covered_distance_m,
            speed_limit_kmh: Some(r.speed_limit_kmh),
            speed_percentiles_kmh: r.speed_percentiles,
            travel_time_percentiles_s: r.travel_time_percentiles,
        }
    }
}

impl From<&RouteRecord> for RecordLine {
    fn from(r: &RouteRecord) -> Self {
        RecordLine {
            record_kind: RecordKind::Route,
            link_id: None,
            route_id: Some(r.route_id.clone()),
            date: r.date,
            tod_start_s: r.tod.start(),
            tod_end_s: r.tod.end(),
            sample_size: r.sample_size,
            full_traversal: r.full_traversal,
            covered_distance_m: r.covered_distance_m,
            speed_limit_kmh: None,
            speed_percentiles_kmh: None,
            travel_time_percentiles_s: r.travel_time_percentiles,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Reads every non-blank line as `T`, reporting 1-based line numbers.
fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path, mut each: impl FnMut(usize, T) -> Result<()>) -> Result<()> {
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        each(i + 1, value)?;
    }
    Ok(())
}

/// Loads a records file. Every record is validated; duplicates are rejected.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut dataset = Dataset::new();
    read_lines(path, |line_no, rec: RecordLine| {
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let tod = TodInterval::new(rec.tod_start_s, rec.tod_end_s).map_err(|e| parse_err(e.to_string()))?;
        let located = |e: Error| match e {
            Error::InvalidRecord { record, reason } => Error::InvalidRecord {
                record: format!("{record} (line {line_no})"),
                reason,
            },
            other => other,
        };
        match rec.record_kind {
            RecordKind::Link => {
                let link_id = rec
                    .link_id
                    .ok_or_else(|| parse_err("link record without link_id".into()))?;
                let speed_limit_kmh = rec
                    .speed_limit_kmh
                    .ok_or_else(|| parse_err("link record without speed_limit_kmh".into()))?;
                dataset
                    .insert_link_record(LinkRecord {
                        link_id,
                        date: rec.date,
                        tod,
                        sample_size: rec.sample_size,
                        full_traversal: rec.full_traversal,
                        covered_distance_m: rec.covered_distance_m,
                        speed_limit_kmh,
                        speed_percentiles: rec.speed_percentiles_kmh,
                        travel_time_percentiles: rec.travel_time_percentiles_s,
                    })
                    .map_err(located)
            }
            RecordKind::Route => {
                let route_id = rec
                    .route_id
                    .ok_or_else(|| parse_err("route record without route_id".into()))?;
                dataset
                    .insert_route_record(RouteRecord {
                        route_id,
                        date: rec.date,
                        tod,
                        sample_size: rec.sample_size,
                        full_traversal: rec.full_traversal,
                        covered_distance_m: rec.covered_distance_m,
                        travel_time_percentiles: rec.travel_time_percentiles_s,
                    })
                    .map_err(located)
            }
        }
    })?;
    Ok(dataset)
}

pub fn load_geometry(path: impl AsRef<Path>) -> Result<Vec<Route>> {
    let path = path.as_ref();
    let mut routes = Vec::new();
    read_lines(path, |line_no, g: GeometryLine| {
        let route = Route::new(
            g.route_id,
            g.links.into_iter().map(|l| (l.link_id, l.length_m, l.speed_limit_kmh)),
        )
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        routes.push(route);
        Ok(())
    })?;
    Ok(routes)
}

pub fn load_dataset_with_geometry(records: impl AsRef<Path>, geometry: impl AsRef<Path>) -> Result<Dataset> {
    Ok(load_dataset(records)?.with_routes(load_geometry(geometry)?))
}

fn write_json_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, &item).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes link records then route records, each in key order.
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_json_lines(
        path.as_ref(),
        dataset
            .link_records()
            .map(RecordLine::from)
            .chain(dataset.route_records().map(RecordLine::from)),
    )
}

pub fn write_geometry<'a>(routes: impl IntoIterator<Item = &'a Route>, path: impl AsRef<Path>) -> Result<()> {
    write_json_lines(
        path.as_ref(),
        routes.into_iter().map(|r| GeometryLine {
            route_id: r.id.clone(),
            links: r
                .links()
                .iter()
                .map(|l| GeometryLink {
                    link_id: l.id.clone(),
                    length_m: l.length_m,
                    speed_limit_kmh: l.speed_limit_kmh,
                })
                .collect(),
        }),
    )
}
