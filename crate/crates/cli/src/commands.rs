//! One function per subcommand. Each returns the number of non-fatal
//! failures (a horizon or fold that could not be processed).

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use smfc_core::dataset::{
    find_gaps, split_chrono, tscv_folds, write_samples, Horizon, SupervisedDataset, NOMINAL_MAX_GAP_SECS,
};
use smfc_core::forecast::{
    fingerprint, load_ensemble, save_ensemble, train_ensemble_with_levels, Quantile, QuantileEnsemble,
};
use smfc_core::metrics::{render_table, MetricReport};
use smfc_core::synth::{generate, SynthConfig};

use crate::config::RunConfig;
use crate::pipeline::{
    evaluate as evaluate_ensemble, load_trace, median, naive_history, render_schedule_table, windows_for, Evaluation,
    LoadedTrace, ScheduleRow,
};
use crate::SynthArgs;

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn trace_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.trace.as_deref().ok_or_else(|| anyhow!("no trace given (use --trace or the `trace` config key)"))
}

pub fn model_path(out_dir: &Path, horizon: Horizon) -> PathBuf {
    out_dir.join(format!("model_{}s.smfc", horizon.seconds()))
}

/// Runs `f` for every configured horizon; failures are reported and counted.
fn each_horizon(cfg: &RunConfig, mut f: impl FnMut(Horizon) -> Result<()>) -> usize {
    let mut failures = 0;
    for &h in &cfg.horizons {
        if let Err(e) = f(h) {
            eprintln!("error: horizon {h}: {e:#}");
            failures += 1;
        }
    }
    failures
}

pub fn ingest(cfg: &RunConfig) -> Result<usize> {
    let path = trace_path(cfg)?;
    let LoadedTrace { series, parse, sanitize } = load_trace(path, cfg.deployment_start)?;
    let records = series.records();
    let gaps = find_gaps(&series, NOMINAL_MAX_GAP_SECS);
    let largest = gaps.iter().map(|g| g.duration()).fold(0.0, f64::max);

    let mut report = cfg.header();
    let _ = writeln!(report, "rows_read = {}", parse.rows_read);
    let _ = writeln!(report, "rows_skipped = {}", parse.rows_skipped);
    let _ = writeln!(report, "duplicates_dropped = {}", parse.duplicates_dropped);
    let _ = writeln!(report, "zero_voltage_dropped = {}", sanitize.removed);
    let _ = writeln!(report, "samples = {}", series.len());
    let _ = writeln!(report, "deployment_start = {}", series.deployment_start());
    let _ = writeln!(report, "first_timestamp = {}", records[0].timestamp);
    let _ = writeln!(report, "last_timestamp = {}", records[records.len() - 1].timestamp);
    let _ = writeln!(report, "gaps_over_{NOMINAL_MAX_GAP_SECS}s = {}", gaps.len());
    let _ = writeln!(report, "largest_gap_s = {largest}");

    let clean = cfg.out_dir.join("trace_clean.csv");
    let mut out = create(&clean)?;
    out.write_all(cfg.header().as_bytes())?;
    write_samples(&series, &mut out)?;
    out.flush()?;
    write_text(&cfg.out_dir.join("ingest_report.txt"), &report)?;
    print!("{}", report.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
    println!("wrote {}", clean.display());
    Ok(0)
}

pub fn train(cfg: &RunConfig) -> Result<usize> {
    let path = trace_path(cfg)?;
    let trace = load_trace(path, cfg.deployment_start)?;
    let failures = each_horizon(cfg, |h| {
        let data = windows_for(&trace.series, h)?;
        let split = split_chrono(&data.dataset, cfg.split)?;
        let ensemble = {
            let mut e = train_ensemble_with_levels(
                &split.train,
                &split.val,
                &cfg.model_config(),
                &cfg.train_config(h),
                cfg.levels,
            )?;
            for line in cfg.render().lines() {
                if let Some((k, v)) = line.split_once(" = ") {
                    e.metadata.insert(k.to_string(), v.to_string());
                }
            }
            e.metadata.insert("resolved_deployment_start".into(), trace.series.deployment_start().to_string());
            e.metadata.insert("horizon".into(), h.seconds().to_string());
            e
        };
        let file = model_path(&cfg.out_dir, h);
        fs::create_dir_all(&cfg.out_dir)?;
        save_ensemble(&ensemble, &file)?;

        let mut summary = cfg.header();
        let _ = writeln!(summary, "# horizon = {h}");
        let _ = writeln!(
            summary,
            "windows = {} (train {}, val {}, test {}), dropped at gaps = {}",
            data.dataset.len(),
            split.train.len(),
            split.val.len(),
            split.test.len(),
            data.windows.dropped
        );
        for q in Quantile::ALL {
            let m = ensemble.model(q);
            let s = m.summary;
            let _ = writeln!(
                summary,
                "{} (alpha {}): epochs {}, best epoch {}, train loss {:.6e} -> {:.6e}, best val loss {:.6e}",
                q.label(),
                m.config.quantile,
                s.epochs_run,
                s.best_epoch,
                s.first_train_loss,
                s.final_train_loss,
                s.best_val_loss
            );
        }
        write_text(&cfg.out_dir.join(format!("train_{}s.txt", h.seconds())), &summary)?;
        println!("horizon {h}: wrote {}", file.display());
        print!("{}", summary.lines().filter(|l| !l.starts_with('#')).map(|l| format!("  {l}\n")).collect::<String>());
        Ok(())
    });
    Ok(failures)
}

/// A loaded ensemble scored on its test split.
struct Scored {
    ensemble: QuantileEnsemble,
    evaluation: Evaluation,
    test_windows: usize,
    history_windows: usize,
    fingerprint_matches: bool,
}

fn score(cfg: &RunConfig, model: &Path) -> Result<Scored> {
    let ensemble = load_ensemble(model).with_context(|| format!("loading {}", model.display()))?;
    let deployment_start = match cfg.deployment_start {
        Some(t) => Some(t),
        None => ensemble.metadata.get("resolved_deployment_start").and_then(|v| v.parse().ok()),
    };
    let trace_file = match &cfg.trace {
        Some(p) => p.clone(),
        None => ensemble
            .metadata
            .get("trace")
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .ok_or_else(|| anyhow!("no trace given and the model does not name one"))?,
    };
    let trace = load_trace(&trace_file, deployment_start)?;
    let data = windows_for(&trace.series, ensemble.horizon)?;
    let split = split_chrono(&data.dataset, cfg.split)?;
    let fingerprint_matches = fingerprint(&split.train) == ensemble.fingerprint;
    if !fingerprint_matches {
        eprintln!("warning: {}: training windows differ from the ones this model was trained on", model.display());
    }
    let test_start = split.train.len() + split.val.len();
    let history = naive_history(&data.dataset, test_start, split.test.len());
    let evaluation = evaluate_ensemble(&ensemble, &split.test, &history, &cfg.harvest)?;
    Ok(Scored {
        test_windows: split.test.len(),
        history_windows: history.len(),
        fingerprint_matches,
        ensemble,
        evaluation,
    })
}

fn models(cfg: &RunConfig, explicit: Option<&Path>) -> Vec<(String, PathBuf)> {
    match explicit {
        Some(p) => vec![(p.display().to_string(), p.to_path_buf())],
        None => cfg.horizons.iter().map(|&h| (h.to_string(), model_path(&cfg.out_dir, h))).collect(),
    }
}

fn run_models(cfg: &RunConfig, explicit: Option<&Path>, mut f: impl FnMut(Scored) -> Result<()>) -> usize {
    let mut failures = 0;
    for (label, path) in models(cfg, explicit) {
        if let Err(e) = score(cfg, &path).and_then(&mut f) {
            eprintln!("error: {label}: {e:#}");
            failures += 1;
        }
    }
    failures
}

fn scored_header(cfg: &RunConfig, s: &Scored) -> String {
    let mut h = cfg.header();
    let _ = writeln!(h, "# horizon = {}", s.ensemble.horizon);
    let _ = writeln!(h, "# test_windows = {}", s.test_windows);
    let _ = writeln!(h, "# naive_history_windows = {}", s.history_windows);
    let _ = writeln!(
        h,
        "# model_fingerprint = {} ({})",
        s.ensemble.fingerprint,
        if s.fingerprint_matches { "matches trace" } else { "differs from trace" }
    );
    h
}

pub fn evaluate(cfg: &RunConfig, model: Option<&Path>) -> Result<usize> {
    Ok(run_models(cfg, model, |s| {
        let secs = s.ensemble.horizon.seconds();
        let header = scored_header(cfg, &s);
        let ev = &s.evaluation;
        let mut report = header.clone();
        for m in &ev.members {
            let _ = writeln!(report, "\n[{}]", member_name(m.quantile));
            report.push_str(&m.report.to_kv_text());
        }
        let _ = writeln!(report, "\n[naive]");
        report.push_str(&ev.naive.totals_block());
        let _ = writeln!(report, "\n[oracle]\nPossible Activations = {}", ev.oracle);
        let columns: Vec<(&str, &MetricReport)> =
            ev.members.iter().map(|m| (column_label(m.quantile), &m.report)).collect();
        let table = render_table(&columns);
        let _ = writeln!(report, "\n{table}");
        write_text(&cfg.out_dir.join(format!("report_{secs}s.txt")), &report)?;

        let lines: Vec<String> = header.lines().map(|l| l.trim_start_matches("# ").to_string()).collect();
        let mut out = create(&cfg.out_dir.join(format!("forecast_{secs}s.csv")))?;
        ev.series.write_csv(&mut out, &lines)?;
        out.flush()?;
        println!("horizon {}:\n{table}", s.ensemble.horizon);
        Ok(())
    }))
}

fn column_label(q: Quantile) -> &'static str {
    match q {
        Quantile::Lower => "L",
        Quantile::Median => "M",
        Quantile::Upper => "U",
    }
}

fn member_name(q: Quantile) -> &'static str {
    match q {
        Quantile::Lower => "lower",
        Quantile::Median => "median",
        Quantile::Upper => "upper",
    }
}

fn parse_members(list: &str) -> Result<Vec<Quantile>> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let q: Quantile = part.parse().map_err(|e| anyhow!("{e}"))?;
        if !out.contains(&q) {
            out.push(q);
        }
    }
    if out.is_empty() {
        bail!("no ensemble members selected");
    }
    Ok(out)
}

pub fn simulate(cfg: &RunConfig, model: Option<&Path>, members: &str) -> Result<usize> {
    let members = parse_members(members)?;
    Ok(run_models(cfg, model, |s| {
        let secs = s.ensemble.horizon.seconds();
        let header = scored_header(cfg, &s);
        let ev = &s.evaluation;
        let mut rows = Vec::new();
        for &q in &members {
            let m = ev.member(q);
            let mut out = create(&cfg.out_dir.join(format!("sim_{secs}s_{}.csv", member_name(q))))?;
            out.write_all(header.as_bytes())?;
            m.trace.write_csv(&mut out)?;
            out.flush()?;
            rows.push(ScheduleRow::from_trace(q.label(), &m.trace));
        }
        let mut out = create(&cfg.out_dir.join(format!("sim_{secs}s_naive.csv")))?;
        out.write_all(header.as_bytes())?;
        ev.naive.write_csv(&mut out)?;
        out.flush()?;
        rows.push(ScheduleRow::from_trace("naive", &ev.naive));
        rows.push(ScheduleRow::oracle(ev.oracle));

        let table = render_schedule_table(&rows, ev.oracle);
        write_text(&cfg.out_dir.join(format!("compare_{secs}s.txt")), &format!("{header}{table}"))?;
        println!("horizon {}:\n{table}", s.ensemble.horizon);
        Ok(())
    }))
}

/// First and last target interval start.
fn span(data: &SupervisedDataset) -> (f64, f64) {
    let first = data.windows.first().map_or(f64::NAN, |w| w.target_interval_start);
    let last = data.windows.last().map_or(f64::NAN, |w| w.target_interval_start);
    (first, last)
}

type Extract = fn(&MetricReport) -> f64;

const AGGREGATED: &[(&str, Extract)] = &[
    ("Predicted Activations", |r| r.predicted_activations as f64),
    ("Possible Activations", |r| r.possible_activations as f64),
    ("Failed Activations (%)", |r| r.failed_activation_rate * 100.0),
    ("Missed Activations (%)", |r| r.missed_activation_rate * 100.0),
    ("Total Energy Error", |r| r.total_energy_error),
    ("Test MAPE Power", |r| r.mape_power),
    ("Test MAPE Voltage", |r| r.mape_voltage),
    ("Test MAPE Current", |r| r.mape_current),
];

pub fn cv(cfg: &RunConfig) -> Result<usize> {
    let path = trace_path(cfg)?;
    let trace = load_trace(path, cfg.deployment_start)?;
    let failures = each_horizon(cfg, |h| {
        let data = windows_for(&trace.series, h)?;
        let folds = tscv_folds(&data.dataset)?;
        let mut text = cfg.header();
        let _ = writeln!(text, "# horizon = {h}");
        let mut reports: Vec<(usize, Vec<MetricReport>, u64, u64)> = Vec::new();
        for fold in &folds {
            let run = || -> Result<Evaluation> {
                let ens = train_ensemble_with_levels(
                    &fold.train,
                    &fold.naive_history,
                    &cfg.model_config(),
                    &cfg.train_config(h),
                    cfg.levels,
                )?;
                evaluate_ensemble(&ens, &fold.test, &fold.naive_history, &cfg.harvest)
            };
            match run() {
                Ok(ev) => {
                    let _ = writeln!(
                        text,
                        "\n[fold {}] train {:?}, naive history {:?}, test {:?}",
                        fold.number, fold.train_range, fold.naive_range, fold.test_range
                    );
                    let _ = writeln!(
                        text,
                        "train targets {} .. {}, test targets {} .. {}",
                        span(&fold.train).0,
                        span(&fold.train).1,
                        span(&fold.test).0,
                        span(&fold.test).1
                    );
                    let columns: Vec<(&str, &MetricReport)> =
                        ev.members.iter().map(|m| (column_label(m.quantile), &m.report)).collect();
                    text.push_str(&render_table(&columns));
                    let mut rows: Vec<ScheduleRow> =
                        ev.members.iter().map(|m| ScheduleRow::from_trace(m.quantile.label(), &m.trace)).collect();
                    rows.push(ScheduleRow::from_trace("naive", &ev.naive));
                    rows.push(ScheduleRow::oracle(ev.oracle));
                    text.push_str(&render_schedule_table(&rows, ev.oracle));
                    reports.push((
                        fold.number,
                        ev.members.into_iter().map(|m| m.report).collect(),
                        ev.naive.totals.successful,
                        ev.oracle,
                    ));
                    println!("horizon {h}: fold {} done", fold.number);
                }
                Err(e) => {
                    let _ = writeln!(text, "\n[fold {}] skipped: {e:#}", fold.number);
                    eprintln!("notice: horizon {h}: fold {} skipped: {e:#}", fold.number);
                }
            }
        }
        if reports.is_empty() {
            bail!("every fold was infeasible");
        }
        let _ = writeln!(text, "\n[aggregate over {} folds: min / median / max]", reports.len());
        for q in Quantile::ALL {
            let _ = writeln!(text, "{}:", q.label());
            for (name, get) in AGGREGATED {
                let v: Vec<f64> = reports.iter().map(|(_, r, _, _)| get(&r[q as usize])).collect();
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let _ = writeln!(text, "  {name:<28} {min:>12.3} {:>12.3} {max:>12.3}", median(&v));
            }
        }
        let naive: Vec<f64> = reports.iter().map(|r| r.2 as f64).collect();
        let oracle: Vec<f64> = reports.iter().map(|r| r.3 as f64).collect();
        let _ = writeln!(text, "naive successful activations (median) = {}", median(&naive));
        let _ = writeln!(text, "oracle activations (median) = {}", median(&oracle));
        write_text(&cfg.out_dir.join(format!("cv_{}s.txt", h.seconds())), &text)?;
        Ok(())
    });
    Ok(failures)
}

pub fn synth(args: &SynthArgs) -> Result<usize> {
    let mut config = SynthConfig {
        seed: args.seed,
        days: args.days,
        base_voltage: args.base_voltage,
        constant: args.constant,
        ..Default::default()
    };
    if let Some(drop) = args.decline {
        config.decline = Some((args.decline_start.unwrap_or(0.0), drop));
    }
    if let Some(rate) = args.outage_rate {
        config.outage_rate = rate;
    }
    if config.days.is_nan() || config.days <= 0.0 {
        bail!("--days must be positive");
    }
    let series = generate(&config);
    let mut out = create(&args.out)?;
    writeln!(out, "# synthetic trace: {config:?}")?;
    write_samples(&series, &mut out)?;
    out.flush()?;
    println!("wrote {} samples to {}", series.len(), args.out.display());
    Ok(0)
}
