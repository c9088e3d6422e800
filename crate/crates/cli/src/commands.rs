use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use fcd_core::estimation::{
    aggregate_route_records, build_matrix, estimate_distribution_with, route_based_estimate, write_estimation_report,
    EstimationRow, SimulationConfig, DEFAULT_RUNS,
};
use fcd_core::ingestion::{
    format_hhmm, generate_synthetic, load_dataset_with_geometry, parse_hhmm, write_dataset, write_geometry, Dataset,
    Route, ScenarioSpec, SchemeKind, SECONDS_PER_DAY,
};
use fcd_core::prediction::{
    compare, forecast, reference_estimate, write_forecast_report, Forecast, ForecastRow, HistoryKind, HistoryStrategy,
    Target, DEFAULT_OVERLAP_K,
};
use fcd_core::speedfield::{measurements_from_records, reconstruct_grid_with, write_grid, AsmParams, GridOptions};
use fcd_core::{Error as CoreError, Execution};

use crate::args::{DataArgs, EstimateArgs, FieldArgs, ForecastArgs, SimulationArgs, SynthArgs};
use crate::config::{pick, pick_switch, FileConfig};
use crate::error::{CliError, Result};

/// Text for standard output or the `--out` file.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub path: Option<PathBuf>,
}

/// Measurements further than this outside the field window are ignored;
/// their kernel weight is below the evaluation cutoff.
const FIELD_MARGIN_S: f64 = 2.0 * 3600.0;

type Header = Vec<(String, String)>;

fn kv(header: &mut Header, key: &str, value: impl ToString) {
    header.push((key.to_string(), value.to_string()));
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{flag}")))
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::NotFound(path))
    }
}

fn hhmm(text: &str, flag: &str) -> Result<u32> {
    parse_hhmm(text).map_err(|_| CliError::Usage(format!("--{flag}: expected HH:MM, got {text:?}")))
}

fn departure(text: &str, flag: &str) -> Result<u32> {
    let t = hhmm(text, flag)?;
    if t >= SECONDS_PER_DAY {
        return Err(CliError::Usage(format!("--{flag} must be before 24:00")));
    }
    Ok(t)
}

fn report_text(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::io("rendering report", e))?;
    String::from_utf8(buf).map_err(|e| CliError::Input(e.to_string()))
}

pub fn cmd_synth(args: SynthArgs, cfg: &FileConfig) -> Result<Output> {
    let scenario_path = existing(required(pick(args.scenario, &cfg.scenario), "scenario")?)?;
    let out = required(pick(args.out, &cfg.out), "out")?;
    let seed = pick(args.seed, &cfg.seed).unwrap_or(0);

    let text = std::fs::read_to_string(&scenario_path)
        .map_err(|e| CliError::io(format!("reading {}", scenario_path.display()), e))?;
    let scenario: ScenarioSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", scenario_path.display())))?;
    let dataset = generate_synthetic(&scenario, seed)?;

    std::fs::create_dir_all(&out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    let records = out.join("records.jsonl");
    let geometry = out.join("geometry.jsonl");
    write_dataset(&dataset, &records)?;
    write_geometry(dataset.routes(), &geometry)?;
    Ok(Output {
        text: format!(
            "seed {seed}: wrote {} link and {} route records to {}, geometry to {}\n",
            dataset.link_records().count(),
            dataset.route_records().count(),
            records.display(),
            geometry.display()
        ),
        path: None,
    })
}

struct DataPaths {
    dataset: PathBuf,
    geometry: PathBuf,
    route: String,
    date: NaiveDate,
    out: Option<PathBuf>,
}

impl DataPaths {
    fn resolve(args: DataArgs, cfg: &FileConfig) -> Result<Self> {
        Ok(Self {
            dataset: required(pick(args.dataset, &cfg.dataset), "dataset")?,
            geometry: required(pick(args.geometry, &cfg.geometry), "geometry")?,
            route: required(pick(args.route, &cfg.route), "route")?,
            date: required(pick(args.date, &cfg.date), "date")?,
            out: pick(args.out, &cfg.out),
        })
    }

    fn check(&self) -> Result<()> {
        existing(self.dataset.clone())?;
        existing(self.geometry.clone())?;
        Ok(())
    }

    /// Loads the files and checks that the route has data on the date.
    fn load(&self) -> Result<(Dataset, Route)> {
        self.check()?;
        let dataset = load_dataset_with_geometry(&self.dataset, &self.geometry)?;
        let route = dataset.route(&self.route)?.clone();
        if !dataset.dates_for_route(&route).contains(&self.date) {
            return Err(CoreError::NoData(format!("no records of route {} on {}", route.id, self.date)).into());
        }
        Ok((dataset, route))
    }

    fn header(&self, header: &mut Header) {
        kv(header, "dataset", self.dataset.display());
        kv(header, "geometry", self.geometry.display());
        kv(header, "route", &self.route);
        kv(header, "date", self.date);
    }
}

const DEFAULT_FIELD_DT_S: f64 = 300.0;

fn median_link_length(route: &Route) -> f64 {
    let mut lengths: Vec<f64> = route.links().iter().map(|l| l.length_m).collect();
    lengths.sort_by(f64::total_cmp);
    let mid = lengths.len() / 2;
    if lengths.len() % 2 == 1 {
        lengths[mid]
    } else {
        0.5 * (lengths[mid - 1] + lengths[mid])
    }
}

pub fn cmd_field(args: FieldArgs, cfg: &FileConfig) -> Result<Output> {
    let defaults = AsmParams::default();
    let params = AsmParams {
        c_free_kmh: pick(args.c_free, &cfg.c_free).unwrap_or(defaults.c_free_kmh),
        c_cong_kmh: pick(args.c_cong, &cfg.c_cong).unwrap_or(defaults.c_cong_kmh),
        v_c_kmh: pick(args.v_c, &cfg.v_c).unwrap_or(defaults.v_c_kmh),
        delta_v_kmh: pick(args.delta_v, &cfg.delta_v).unwrap_or(defaults.delta_v_kmh),
    };
    params.validate()?;
    let dx = pick(args.dx, &cfg.dx);
    let dt = pick(args.dt, &cfg.dt).unwrap_or(DEFAULT_FIELD_DT_S);
    let from = hhmm(&pick(args.from, &cfg.from).unwrap_or_else(|| "00:00".into()), "from")?;
    let to = hhmm(&pick(args.to, &cfg.to).unwrap_or_else(|| "24:00".into()), "to")?;
    if from >= to {
        return Err(CliError::Usage("--from must be earlier than --to".into()));
    }
    let data = DataPaths::resolve(args.data, cfg)?;
    let (dataset, route) = data.load()?;

    let (lo, hi) = (from as f64, to as f64);
    let mut measurements = measurements_from_records(&dataset, &route, data.date);
    measurements.retain(|m| m.time_s >= lo - FIELD_MARGIN_S && m.time_s <= hi + FIELD_MARGIN_S);
    if measurements.is_empty() {
        return Err(CoreError::NoData(format!("no observed links of route {} on {}", route.id, data.date)).into());
    }
    let options = GridOptions {
        x_range: Some((0.0, route.total_length_m())),
        t_range: Some((lo, hi)),
        ..GridOptions::default()
    };
    let dx = dx.unwrap_or_else(|| median_link_length(&route));
    let n = measurements.len();
    let field = reconstruct_grid_with(measurements, params, dx, dt, &options)?;

    let mut header = Header::new();
    data.header(&mut header);
    kv(&mut header, "from", format_hhmm(from));
    kv(&mut header, "to", format_hhmm(to));
    kv(&mut header, "measurements", n);
    let text = report_text(|buf| write_grid(&field, &header, buf))?;
    Ok(Output { text, path: data.out })
}

struct Simulation {
    scheme: Option<SchemeKind>,
    config: SimulationConfig,
}

impl Simulation {
    fn resolve(args: SimulationArgs, cfg: &FileConfig) -> Result<Self> {
        let alpha = pick(args.alpha, &cfg.alpha).unwrap_or(1.0);
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CliError::Usage(format!("--alpha must lie in (0, 1], got {alpha}")));
        }
        let runs = pick(args.runs, &cfg.runs).unwrap_or(DEFAULT_RUNS);
        if runs == 0 {
            return Err(CliError::Usage("--runs must be positive".into()));
        }
        Ok(Self {
            scheme: pick(args.scheme, &cfg.scheme),
            config: SimulationConfig {
                alpha,
                n_runs: runs,
                seed: pick(args.seed, &cfg.seed).unwrap_or(0),
            },
        })
    }

    fn header(&self, header: &mut Header) {
        kv(header, "alpha", self.config.alpha);
        kv(header, "runs", self.config.n_runs);
        kv(header, "seed", self.config.seed);
    }
}

pub fn cmd_estimate(args: EstimateArgs, cfg: &FileConfig) -> Result<Output> {
    let sim = Simulation::resolve(args.sim, cfg)?;
    let scheme = sim.scheme.unwrap_or(SchemeKind::Fixed5Min);
    let single = pick(args.departure, &cfg.departure);
    let step = pick(args.sweep_step, &cfg.sweep_step);
    let sweep_start = pick(args.sweep_start, &cfg.sweep_start);
    let sweep_end = pick(args.sweep_end, &cfg.sweep_end);

    let (departures, described) = match (single, step) {
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --departure or --sweep-step".into())),
        (None, None) => return Err(CliError::Usage("missing --departure or --sweep-step".into())),
        (Some(d), None) => {
            if sweep_start.is_some() || sweep_end.is_some() {
                return Err(CliError::Usage(
                    "--sweep-start and --sweep-end need --sweep-step".into(),
                ));
            }
            let t = departure(&d, "departure")?;
            (vec![t], format_hhmm(t))
        }
        (None, Some(step)) => {
            if step == 0 {
                return Err(CliError::Usage("--sweep-step must be positive".into()));
            }
            let start = hhmm(sweep_start.as_deref().unwrap_or("00:00"), "sweep-start")?;
            let end = hhmm(sweep_end.as_deref().unwrap_or("24:00"), "sweep-end")?;
            if start >= end {
                return Err(CliError::Usage("--sweep-start must be earlier than --sweep-end".into()));
            }
            let ts: Vec<u32> = (start..end).step_by(step as usize * 60).collect();
            (
                ts,
                format!("{}-{} every {step} min", format_hhmm(start), format_hhmm(end)),
            )
        }
    };
    let data = DataPaths::resolve(args.data, cfg)?;
    let (dataset, route) = data.load()?;

    let mut rows = Vec::with_capacity(departures.len());
    let mut warnings: Vec<String> = Vec::new();
    if scheme.is_link_based() {
        let matrix = build_matrix(&dataset, &route, &scheme.scheme(), &[data.date])?;
        if matrix.fallback_count() > 0 {
            warnings.push(format!(
                "{} cells without data use speed limits",
                matrix.fallback_count()
            ));
        }
        for &t in &departures {
            let est = estimate_distribution_with(&matrix, t as f64, &sim.config, Execution::Parallel)?;
            rows.push(EstimationRow {
                departure_time_s: t as f64,
                scheme: scheme.to_string(),
                alpha: sim.config.alpha,
                summary: est.summary,
            });
        }
    } else {
        let records = aggregate_route_records(dataset.route_records_on(&route.id, data.date), &scheme.scheme())?;
        for &t in &departures {
            let est = route_based_estimate(&route, &records, t as f64, sim.config.n_runs, sim.config.seed)?;
            for w in est.warnings {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
            rows.push(EstimationRow {
                departure_time_s: t as f64,
                scheme: scheme.to_string(),
                alpha: sim.config.alpha,
                summary: est.summary,
            });
        }
    }

    let mut header = Header::new();
    data.header(&mut header);
    kv(&mut header, "scheme", scheme);
    sim.header(&mut header);
    kv(&mut header, "departures", described);
    for w in &warnings {
        kv(&mut header, "warning", w);
    }
    let text = report_text(|buf| write_estimation_report(&rows, &header, buf))?;
    Ok(Output { text, path: data.out })
}

fn join_dates(dates: &[NaiveDate]) -> String {
    dates.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
}

pub fn cmd_forecast(args: ForecastArgs, cfg: &FileConfig) -> Result<Output> {
    let sim = Simulation::resolve(args.sim, cfg)?;
    let schemes: Vec<SchemeKind> = match sim.scheme {
        Some(s) => vec![s],
        None => SchemeKind::ALL.to_vec(),
    };
    let departure_s = departure(
        &required(pick(args.departure, &cfg.departure), "departure")?,
        "departure",
    )?;
    let all = pick_switch(args.all_strategies, cfg.all_strategies);
    let strategy = pick(args.strategy, &cfg.strategy);
    let custom_dates = pick(args.custom_dates, &cfg.custom_dates);
    let kinds: Vec<HistoryKind> = match (all, strategy.as_deref()) {
        (true, Some(_)) => return Err(CliError::Usage("give either --strategy or --all-strategies".into())),
        (true, None) => HistoryKind::NAMED.to_vec(),
        (false, Some("custom")) => vec![HistoryKind::Custom(required(custom_dates, "custom-dates")?)],
        (false, name) => vec![name
            .unwrap_or("prev-month")
            .parse()
            .map_err(|e: CoreError| CliError::Usage(e.to_string()))?],
    };
    let exclusions = pick(args.exclude_dates, &cfg.exclude_dates).unwrap_or_default();
    let weekday_lock = !pick_switch(args.any_weekday, cfg.any_weekday);
    let k = pick(args.k, &cfg.k).unwrap_or(DEFAULT_OVERLAP_K);
    if !(k.is_finite() && k >= 0.0) {
        return Err(CliError::Usage(format!("--k must be a non-negative number, got {k}")));
    }
    let data = DataPaths::resolve(args.data, cfg)?;
    data.check()?;
    let dataset = load_dataset_with_geometry(&data.dataset, &data.geometry)?;
    let route = dataset.route(&data.route)?.clone();
    let target = Target {
        date: data.date,
        departure_s,
    };

    let references: Vec<Forecast> = schemes
        .iter()
        .map(|&s| reference_estimate(&dataset, &route, target, s, &sim.config, Execution::Parallel))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<ForecastRow> = references
        .iter()
        .map(|r| ForecastRow::from_forecast("reference", r, None))
        .collect();
    let mut days_used = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    for kind in kinds {
        let strategy = HistoryStrategy {
            kind,
            weekday_lock,
            exclusions: exclusions.clone(),
        };
        for (scheme, reference) in schemes.iter().zip(&references) {
            let fc = forecast(
                &dataset,
                &route,
                target,
                &strategy,
                *scheme,
                &sim.config,
                Execution::Parallel,
            )?;
            let comparison = compare(&reference.summary, &fc.summary, k)?;
            rows.push(ForecastRow::from_forecast(strategy.name(), &fc, Some(comparison)));
            if !days_used.iter().any(|(name, _)| *name == strategy.name()) {
                days_used.push((strategy.name(), join_dates(&fc.days)));
            }
            for w in fc.warnings {
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
    }

    let mut header = Header::new();
    data.header(&mut header);
    kv(&mut header, "departure", format_hhmm(departure_s));
    sim.header(&mut header);
    kv(&mut header, "k", k);
    kv(&mut header, "weekday_lock", weekday_lock);
    kv(&mut header, "exclusions", join_dates(&exclusions));
    for (name, days) in days_used {
        kv(&mut header, &format!("days.{name}"), days);
    }
    for w in &warnings {
        kv(&mut header, "warning", w);
    }
    let text = report_text(|buf| write_forecast_report(&rows, &header, buf))?;
    Ok(Output { text, path: data.out })
}

/// Writes `output` to its file or to `stdout`.
pub fn emit(output: &Output, stdout: &mut dyn std::io::Write) -> Result<()> {
    match &output.path {
        Some(path) => write_file(path, &output.text),
        None => stdout
            .write_all(output.text.as_bytes())
            .map_err(|e| CliError::io("writing standard output", e)),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}
