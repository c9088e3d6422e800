use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

/// Runs the command line in-process: (exit code, stdout, stderr).
fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = fcd_cli::run(std::iter::once("fcdtt").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Five links, the target Monday plus 12 previous Mondays, jam on each.
fn scenario_json(jam: bool) -> String {
    let links: Vec<String> = (0..5)
        .map(|i| {
            format!(
                r#"{{"link_id": "S{i}", "length_m": {}, "speed_limit_kmh": 100}}"#,
                800 + 150 * i
            )
        })
        .collect();
    let days: Vec<String> = (0..13)
        .map(|k| {
            let date = chrono::NaiveDate::from_ymd_opt(2016, 2, 29).unwrap() - chrono::Duration::days(7 * (12 - k));
            let events = if jam {
                format!(
                    r#"[{{"onset_s": {}, "origin_m": 4000, "speed_drop_kmh": 60, "duration_s": 1200}}]"#,
                    8 * 3600 + 600 * (k % 3)
                )
            } else {
                "[]".into()
            };
            format!(r#"{{"date": "{date}", "events": {events}}}"#)
        })
        .collect();
    format!(
        r#"{{"route_id": "R", "links": [{}], "free_flow_kmh": 90, "median_jitter": {}, "days": [{}]}}"#,
        links.join(","),
        if jam { 0.02 } else { 0.0 },
        days.join(",")
    )
}

struct Data {
    dir: TempDir,
}

impl Data {
    fn new(jam: bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let scenario = dir.path().join("scenario.json");
        std::fs::write(&scenario, scenario_json(jam)).unwrap();
        let (code, _, err) = run(&[
            "synth",
            "--scenario",
            p(&scenario),
            "--seed",
            "5",
            "--out",
            p(dir.path()),
        ]);
        assert_eq!(code, 0, "{err}");
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn args<'a>(&'a self, records: &'a str, geometry: &'a str) -> Vec<&'a str> {
        vec![
            "--dataset",
            records,
            "--geometry",
            geometry,
            "--route",
            "R",
            "--date",
            "2016-02-29",
        ]
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn rows(report: &str) -> Vec<&str> {
    report.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn synth_writes_records_and_geometry_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, scenario_json(true)).unwrap();
    for out in ["a", "b"] {
        let (code, stdout, _) = run(&[
            "synth",
            "--scenario",
            p(&scenario),
            "--seed",
            "11",
            "--out",
            p(&dir.path().join(out)),
        ]);
        assert_eq!(code, 0);
        assert!(stdout.contains("18720 link and 3744 route records"), "{stdout}");
    }
    for file in ["records.jsonl", "geometry.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn missing_scenario_is_not_found() {
    let (code, _, err) = run(&["synth", "--scenario", "/nonexistent/s.json", "--out", "/tmp/x"]);
    assert_eq!(code, 2);
    assert!(err.contains("not found"), "{err}");
}

#[test]
fn malformed_scenario_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, r#"{"route_id": "R"}"#).unwrap();
    let (code, _, err) = run(&["synth", "--scenario", p(&scenario), "--out", p(dir.path())]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error (input)"), "{err}");
}

#[test]
fn field_echoes_default_parameters_and_is_flat_on_a_quiet_day() {
    let data = Data::new(false);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["field"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend(["--dx", "500", "--dt", "900", "--from", "06:00", "--to", "10:00"]);
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    for line in [
        "# c_free_kmh = 70",
        "# c_cong_kmh = -15",
        "# v_c_kmh = 50",
        "# delta_v_kmh = 10",
    ] {
        assert!(out.contains(line), "{line}");
    }
    let speeds: Vec<f64> = rows(&out)
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(speeds.len(), 11 * 16);
    assert!(speeds.iter().all(|&v| v == speeds[0]), "{speeds:?}");
}

#[test]
fn field_overrides_reach_the_header() {
    let data = Data::new(true);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["field"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend(["--c-cong", "-18", "--v-c", "45", "--dx", "1000", "--dt", "3600"]);
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    assert!(out.contains("# c_cong_kmh = -18\n# v_c_kmh = 45\n"));
}

#[test]
fn field_rejects_unknown_route_and_date() {
    let data = Data::new(false);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let (code, _, _) = run(&[
        "field",
        "--dataset",
        p(&r),
        "--geometry",
        p(&g),
        "--route",
        "nope",
        "--date",
        "2016-02-29",
    ]);
    assert_eq!(code, 2);
    let (code, _, err) = run(&[
        "field",
        "--dataset",
        p(&r),
        "--geometry",
        p(&g),
        "--route",
        "R",
        "--date",
        "2016-03-01",
    ]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn estimate_sweep_and_defaults() {
    let data = Data::new(true);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["estimate"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend(["--sweep-step", "20", "--runs", "50"]);
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(rows(&out).len(), 72);
    assert!(out.contains("# scheme = 5min\n# alpha = 1\n# runs = 50\n# seed = 0\n"));

    let mut args = vec!["estimate"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend(["--departure", "08:10"]);
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    assert!(out.contains("# runs = 500\n"));
    assert_eq!(rows(&out).len(), 1);
    assert!(rows(&out)[0].starts_with("29400,5min,1,"));
}

#[test]
fn estimate_usage_errors() {
    let data = Data::new(false);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    for extra in [
        vec!["--departure", "08:00", "--alpha", "0"],
        vec!["--departure", "08:00", "--alpha", "1.5"],
        vec!["--departure", "25:00"],
        vec!["--departure", "08:00", "--sweep-step", "20"],
        vec![],
        vec!["--departure", "08:00", "--scheme", "hourly"],
    ] {
        let mut args = vec!["estimate"];
        args.extend(data.args(p(&r), p(&g)));
        args.extend(extra.iter().copied());
        let (code, _, err) = run(&args);
        assert_eq!(code, 1, "{extra:?}: {err}");
    }
}

#[test]
fn demand_scheme_uses_route_records() {
    let data = Data::new(true);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["estimate"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend(["--departure", "08:00", "--scheme", "demand5", "--runs", "100"]);
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    assert!(rows(&out)[0].starts_with("28800,demand5,"));
    assert!(!out.contains("# warning"));
}

#[test]
fn forecast_strategies_and_days_used() {
    let data = Data::new(true);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["forecast"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend(["--departure", "08:00", "--strategy", "prev-week", "--runs", "100"]);
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("# days.prev-week = 2016-02-22\n"));
    assert_eq!(rows(&out).len(), 3 + 3);

    let mut args = vec!["forecast"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend([
        "--departure",
        "08:00",
        "--all-strategies",
        "--runs",
        "100",
        "--exclude-dates",
        "2016-02-08",
    ]);
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    let body = rows(&out);
    assert_eq!(body.iter().filter(|l| l.starts_with("reference,")).count(), 3);
    assert_eq!(body.iter().filter(|l| !l.starts_with("reference,")).count(), 9);
    assert!(out.contains("# days.prev-month = 2016-02-22,2016-02-15,2016-02-01\n"));
    assert!(body.iter().any(|l| l.starts_with("prev-3-months,11,20min,")));
}

#[test]
fn forecast_without_history_reports_found_dates() {
    let data = Data::new(false);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["forecast", "--dataset", p(&r), "--geometry", p(&g), "--route", "R"];
    args.extend([
        "--date",
        "2015-12-14",
        "--departure",
        "08:00",
        "--strategy",
        "prev-week",
        "--exclude-dates",
        "2015-12-07",
    ]);
    let (code, _, err) = run(&args);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("2015-12-07"), "{err}");
}

#[test]
fn custom_strategy_on_the_target_day_matches_the_reference() {
    let data = Data::new(true);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["forecast"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend([
        "--departure",
        "08:20",
        "--strategy",
        "custom",
        "--custom-dates",
        "2016-02-29",
        "--scheme",
        "20min",
    ]);
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let body = rows(&out);
    let cols = |l: &str| l.split(',').skip(1).take(5).map(String::from).collect::<Vec<_>>();
    assert_eq!(cols(body[0]), cols(body[1]));
    assert!(body[1].ends_with(",0.00,0.00,true"), "{}", body[1]);
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let data = Data::new(true);
    let config = data.path("run.toml");
    std::fs::write(
        &config,
        format!(
            "dataset = {:?}\ngeometry = {:?}\nroute = \"R\"\ndate = \"2016-02-29\"\ndeparture = \"08:00\"\nruns = 40\nalpha = 0.3\n",
            p(&data.path("records.jsonl")),
            p(&data.path("geometry.jsonl"))
        ),
    )
    .unwrap();
    let (code, out, err) = run(&["estimate", "--config", p(&config)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("# alpha = 0.3\n# runs = 40\n"));
    let (_, out, _) = run(&["estimate", "--config", p(&config), "--runs", "60"]);
    assert!(out.contains("# runs = 60\n"));

    std::fs::write(&config, "speed = 3\n").unwrap();
    let (code, _, _) = run(&["estimate", "--config", p(&config)]);
    assert_eq!(code, 2);
}

#[test]
fn output_file_and_thread_count() {
    let data = Data::new(true);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = data.path(&format!("est{threads}.csv"));
        let mut args = vec!["estimate", "--threads", threads];
        args.extend(data.args(p(&r), p(&g)));
        args.extend(["--departure", "08:05", "--alpha", "0.2", "--out", p(&out)]);
        let (code, stdout, _) = run(&args);
        assert_eq!(code, 0);
        assert!(stdout.is_empty());
        reports.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let (code, _, _) = run(&["estimate", "--threads", "0", "--departure", "08:00"]);
    assert_eq!(code, 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fcdtt");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let help = status(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let help = String::from_utf8(status(&["estimate", "--help"]).stdout).unwrap();
    assert!(help.contains("[default: 500]") && help.contains("[default: 1]"));
    let help = String::from_utf8(status(&["field", "--help"]).stdout).unwrap();
    for d in ["[default: 70]", "[default: -15]", "[default: 50]", "[default: 10]"] {
        assert!(help.contains(d), "{d}");
    }
    assert_eq!(status(&["estimate", "--bogus"]).status.code(), Some(1));
    assert_eq!(status(&[]).status.code(), Some(1));
    let missing = status(&["synth", "--scenario", "/nope.json", "--out", "/tmp/nope"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8(missing.stderr).unwrap().contains("not found"));
}

#[test]
fn field_defaults_to_median_link_length_and_five_minutes() {
    let data = Data::new(false);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["field"];
    args.extend(data.args(p(&r), p(&g)));
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("# dx_m = 1100\n# dt_s = 300\n"), "{out:.300}");
    assert_eq!(rows(&out).len(), 5 * 288);
}

#[test]
fn congested_cells_form_one_band() {
    let data = Data::new(true);
    let (r, g) = (data.path("records.jsonl"), data.path("geometry.jsonl"));
    let mut args = vec!["field"];
    args.extend(data.args(p(&r), p(&g)));
    args.extend(["--dx", "200", "--dt", "60", "--from", "07:30", "--to", "09:30"]);
    let (code, out, _) = run(&args);
    assert_eq!(code, 0);
    let cells: Vec<(f64, f64, f64)> = rows(&out)
        .iter()
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect();
    let (nt, nx) = (120, cells.len() / 120);
    assert_eq!(nt * nx, cells.len());
    // Rows are time-major.
    let slow: Vec<bool> = cells.iter().map(|c| c.2 < 50.0).collect();
    let total = slow.iter().filter(|&&s| s).count();
    assert!(total > 20, "{total} congested cells");
    let start = slow.iter().position(|&s| s).unwrap();
    let mut seen = vec![false; slow.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut reached = 1;
    while let Some(c) = stack.pop() {
        let (it, ix) = (c / nx, c % nx);
        let mut next = Vec::new();
        if it > 0 {
            next.push(c - nx);
        }
        if it + 1 < nt {
            next.push(c + nx);
        }
        if ix > 0 {
            next.push(c - 1);
        }
        if ix + 1 < nx {
            next.push(c + 1);
        }
        for n in next {
            if slow[n] && !seen[n] {
                seen[n] = true;
                reached += 1;
                stack.push(n);
            }
        }
    }
    assert_eq!(reached, total);
}
