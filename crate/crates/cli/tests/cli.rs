use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smfc_core::dataset::{write_samples, SampleRecord, SampleSeries};
use smfc_core::synth::{generate, SynthConfig};
use tempfile::TempDir;

const FAST: [&str; 4] = ["--max-epochs", "30", "--patience", "5"];

fn smfc(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smfc")).args(args).arg("--out-dir").arg(out_dir).output().expect("run smfc")
}

fn run_ok(args: &[&str], out_dir: &Path) -> String {
    let out = smfc(args, out_dir);
    assert!(
        out.status.success(),
        "smfc {args:?} failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_trace(dir: &TempDir, name: &str, config: SynthConfig) -> PathBuf {
    let path = dir.path().join(name);
    write_samples(&generate(&config), fs::File::create(&path).unwrap()).unwrap();
    path
}

fn read(path: PathBuf) -> String {
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Value of `name = value` inside the `[section]` block of a report.
fn report_value(report: &str, section: &str, name: &str) -> f64 {
    let start = report.find(&format!("[{section}]")).unwrap_or_else(|| panic!("no [{section}]"));
    report[start..]
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{name} = ")))
        .unwrap_or_else(|| panic!("no {name} in [{section}]"))
        .trim()
        .parse()
        .unwrap()
}

/// Whitespace-separated fields of the schedule-table row starting with `label`.
fn schedule_row(table: &str, label: &str) -> Vec<f64> {
    let line = table
        .lines()
        .find(|l| l.split_whitespace().next() == Some(label))
        .unwrap_or_else(|| panic!("no {label} row in\n{table}"));
    line.split_whitespace().skip(1).map(|f| f.parse().unwrap()).collect()
}

#[test]
fn missing_trace_fails_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("no_such_trace.csv");
    let out = smfc(&["ingest", "--trace", missing.to_str().unwrap()], &dir.path().join("out"));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_trace.csv"));
}

#[test]
fn ingest_reports_zero_voltage_drops() {
    let dir = TempDir::new().unwrap();
    let clean = write_trace(&dir, "clean.csv", SynthConfig { days: 0.5, outage_rate: 0.0, ..Default::default() });
    let out = dir.path().join("a");
    run_ok(&["ingest", "--trace", clean.to_str().unwrap()], &out);
    let report = read(out.join("ingest_report.txt"));
    assert!(report.contains("zero_voltage_dropped = 0"), "{report}");
    assert!(report.contains("rows_skipped = 0"));

    let series = generate(&SynthConfig { days: 0.5, outage_rate: 0.0, ..Default::default() });
    let mut records: Vec<SampleRecord> = series.records().to_vec();
    for r in records.iter_mut().step_by(100) {
        r.voltage = 0.0;
    }
    let dropped = records.iter().filter(|r| r.voltage == 0.0).count();
    let noisy = dir.path().join("noisy.csv");
    let noisy_series = SampleSeries::new(records, series.deployment_start()).unwrap();
    write_samples(&noisy_series, fs::File::create(&noisy).unwrap()).unwrap();
    let out = dir.path().join("b");
    run_ok(&["ingest", "--trace", noisy.to_str().unwrap()], &out);
    let report = read(out.join("ingest_report.txt"));
    assert!(report.contains(&format!("zero_voltage_dropped = {dropped}")), "{report}");
    let cleaned = read(out.join("trace_clean.csv"));
    assert!(cleaned.starts_with("# trace = "));
}

#[test]
fn one_model_file_per_horizon() {
    let dir = TempDir::new().unwrap();
    let trace = write_trace(&dir, "t.csv", SynthConfig { days: 2.0, seed: 3, ..Default::default() });
    let out = dir.path().join("out");
    let mut args = vec!["train", "--trace", trace.to_str().unwrap(), "--horizons", "180,3600"];
    args.extend(FAST);
    let stdout = run_ok(&args, &out);
    assert!(out.join("model_180s.smfc").is_file());
    assert!(out.join("model_3600s.smfc").is_file());
    assert!(!out.join("model_900s.smfc").exists());
    assert!(stdout.contains("best epoch"));
    let summary = read(out.join("train_3600s.txt"));
    assert!(summary.contains("# batch_size = auto"));
}

#[test]
fn short_horizon_failure_does_not_stop_the_others() {
    let dir = TempDir::new().unwrap();
    let trace = write_trace(&dir, "t.csv", SynthConfig { days: 0.3, seed: 4, ..Default::default() });
    let out = dir.path().join("out");
    let mut args = vec!["train", "--trace", trace.to_str().unwrap(), "--horizons", "180,3600"];
    args.extend(FAST);
    let result = smfc(&args, &out);
    assert!(!result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("3600"));
    assert!(out.join("model_180s.smfc").is_file());
    assert!(!out.join("model_3600s.smfc").exists());
}

#[test]
fn evaluate_on_a_constant_trace() {
    let dir = TempDir::new().unwrap();
    let trace = write_trace(&dir, "c.csv", SynthConfig { days: 2.0, constant: true, ..Default::default() });
    let out = dir.path().join("out");
    run_ok(&["train", "--trace", trace.to_str().unwrap(), "--horizons", "900"], &out);
    let stdout = run_ok(&["evaluate", "--trace", trace.to_str().unwrap(), "--horizons", "900"], &out);
    let report = read(out.join("report_900s.txt"));

    assert!(report_value(&report, "median", "Test MAPE Voltage") < 1.0, "{report}");
    for row in [
        "Predicted Activations",
        "Possible Activations",
        "Failed Activations (%)",
        "Missed Activations (%)",
        "Total Energy Error",
        "Test MAPE Power",
        "Test MAPE Voltage",
        "Test MAPE Current",
    ] {
        assert!(report.contains(row) && stdout.contains(row), "missing {row}");
    }
    assert!(report.contains("# horizons = 900"));
    assert!(report.contains("matches trace"));

    let csv = read(out.join("forecast_900s.csv"));
    let test_windows: usize = csv.lines().find_map(|l| l.strip_prefix("# test_windows = ")).unwrap().parse().unwrap();
    let data_rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data_rows, test_windows);
    assert!(test_windows > 0);
}

#[test]
fn evaluate_warns_on_a_different_trace() {
    let dir = TempDir::new().unwrap();
    let a = write_trace(&dir, "a.csv", SynthConfig { days: 2.0, seed: 1, ..Default::default() });
    let b = write_trace(&dir, "b.csv", SynthConfig { days: 2.0, seed: 2, ..Default::default() });
    let out = dir.path().join("out");
    let mut args = vec!["train", "--trace", a.to_str().unwrap(), "--horizons", "3600"];
    args.extend(FAST);
    run_ok(&args, &out);
    let result = smfc(&["evaluate", "--trace", b.to_str().unwrap(), "--horizons", "3600"], &out);
    assert!(result.status.success(), "a warning must not change the exit status");
    assert!(String::from_utf8_lossy(&result.stderr).contains("warning"));
}

#[test]
fn simulate_compares_members_with_baselines() {
    let dir = TempDir::new().unwrap();
    let trace = write_trace(&dir, "t.csv", SynthConfig { days: 4.0, seed: 5, ..Default::default() });
    let out = dir.path().join("out");
    let mut args = vec!["train", "--trace", trace.to_str().unwrap(), "--horizons", "900"];
    args.extend(FAST);
    run_ok(&args, &out);
    run_ok(
        &["simulate", "--trace", trace.to_str().unwrap(), "--horizons", "900", "--members", "lower,median,upper"],
        &out,
    );
    let table = read(out.join("compare_900s.txt"));
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.iter().filter(|l| l.starts_with("naive")).count(), 1);
    let oracle = schedule_row(&table, "oracle")[1];
    for label in ["L", "M", "U", "naive"] {
        assert!(schedule_row(&table, label)[1] <= oracle, "{label} beats the oracle\n{table}");
    }
    assert!(schedule_row(&table, "L")[2] <= schedule_row(&table, "M")[2], "{table}");
    for file in ["sim_900s_lower.csv", "sim_900s_median.csv", "sim_900s_upper.csv", "sim_900s_naive.csv"] {
        assert!(read(out.join(file)).contains("# e_act = "), "{file}");
    }
}

#[test]
fn simulate_rejects_unknown_members() {
    let dir = TempDir::new().unwrap();
    let out = smfc(&["simulate", "--members", "lowest"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("lowest"));
}

#[test]
fn cv_runs_four_chronological_folds() {
    let dir = TempDir::new().unwrap();
    let trace = write_trace(&dir, "t.csv", SynthConfig { days: 6.0, seed: 6, ..Default::default() });
    let out = dir.path().join("out");
    let mut args = vec!["cv", "--trace", trace.to_str().unwrap(), "--horizons", "3600"];
    args.extend(FAST);
    run_ok(&args, &out);
    let text = read(out.join("cv_3600s.txt"));
    for k in 1..=4 {
        assert!(text.contains(&format!("[fold {k}] train")), "fold {k} missing\n{text}");
    }
    assert!(text.contains("[aggregate over 4 folds"));
    let spans: Vec<f64> = text
        .lines()
        .find(|l| l.starts_with("train targets"))
        .unwrap()
        .split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .filter_map(|s| s.parse().ok())
        .collect();
    let [_, train_end, test_start, _] = spans[..] else { panic!("{spans:?}") };
    assert!(train_end < test_start);
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = TempDir::new().unwrap();
    let trace = write_trace(&dir, "t.csv", SynthConfig { days: 0.5, ..Default::default() });
    let config = dir.path().join("run.conf");
    fs::write(&config, "# comment\nseed = 42\nefficiency = 0.5\n\ne_act = 0.000005\n").unwrap();
    let out = dir.path().join("out");
    run_ok(
        &["ingest", "--config", config.to_str().unwrap(), "--trace", trace.to_str().unwrap(), "--e-act", "0.000004"],
        &out,
    );
    let report = read(out.join("ingest_report.txt"));
    assert!(report.contains("# seed = 42"));
    assert!(report.contains("# efficiency = 0.5"));
    assert!(report.contains("# e_act = 0.000004"));
    assert!(report.contains("# r_int = 6926"));

    fs::write(&config, "no_such_key = 1\n").unwrap();
    let bad = smfc(&["ingest", "--config", config.to_str().unwrap(), "--trace", trace.to_str().unwrap()], &out);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("no_such_key"));
}

#[test]
fn synth_is_seeded() {
    let dir = TempDir::new().unwrap();
    let gen = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_smfc"))
            .args(["synth", "--days", "0.2", "--seed", seed, "--out"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success());
        fs::read(path).unwrap()
    };
    assert_eq!(gen("a.csv", "3"), gen("b.csv", "3"));
    assert_ne!(gen("c.csv", "3"), gen("d.csv", "4"));
}
