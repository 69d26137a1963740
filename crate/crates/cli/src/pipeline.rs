//! Trace-to-report plumbing shared by the commands.

use std::path::Path;

use anyhow::{Context, Result};
use smfc_core::dataset::{
    build_supervised, read_samples_file, resample, sanitize, Horizon, ParseReport, SampleSeries, SanitizeReport,
    SupervisedDataset, WindowReport, TARGET_COUNT,
};
use smfc_core::forecast::{forecast_series, quantile_crossing_rate, ForecastSeries, Quantile, QuantileEnsemble};
use smfc_core::harvestsim::{
    interval_energies, naive_schedule, oracle_max, simulate_schedule, HarvestConfig, SimulationTrace,
};
use smfc_core::metrics::{interval_coverage, mape, total_energy_error, MetricReport};

pub struct LoadedTrace {
    /// Sanitized samples.
    pub series: SampleSeries,
    pub parse: ParseReport,
    pub sanitize: SanitizeReport,
}

pub fn load_trace(path: &Path, deployment_start: Option<f64>) -> Result<LoadedTrace> {
    let (raw, parse) =
        read_samples_file(path, deployment_start).with_context(|| format!("reading {}", path.display()))?;
    let (series, sanitize) = sanitize(&raw).with_context(|| format!("sanitizing {}", path.display()))?;
    Ok(LoadedTrace { series, parse, sanitize })
}

pub struct HorizonData {
    pub dataset: SupervisedDataset,
    pub windows: WindowReport,
    pub intervals: usize,
    pub missing_intervals: usize,
}

pub fn windows_for(series: &SampleSeries, horizon: Horizon) -> Result<HorizonData> {
    let rs = resample(series, horizon)?;
    let (dataset, windows) = build_supervised(&rs)?;
    Ok(HorizonData { dataset, windows, intervals: rs.intervals.len(), missing_intervals: rs.missing_count() })
}

/// The `test_len` windows just before `test_start`, or all of them when the
/// data does not reach that far back. This is the naive baseline's history.
pub fn naive_history(dataset: &SupervisedDataset, test_start: usize, test_len: usize) -> SupervisedDataset {
    dataset.slice(test_start.saturating_sub(test_len)..test_start)
}

pub struct MemberEvaluation {
    pub quantile: Quantile,
    pub report: MetricReport,
    pub trace: SimulationTrace,
}

pub struct Evaluation {
    pub series: ForecastSeries,
    /// Lower, median, upper.
    pub members: Vec<MemberEvaluation>,
    pub naive: SimulationTrace,
    pub oracle: u64,
}

impl Evaluation {
    pub fn member(&self, q: Quantile) -> &MemberEvaluation {
        &self.members[q as usize]
    }
}

fn column(rows: &[[f64; TARGET_COUNT]], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

/// Scores every member on `test` and runs the schedules: one per member,
/// the naive baseline fed by `history`, and the oracle count.
pub fn evaluate(
    ensemble: &QuantileEnsemble,
    test: &SupervisedDataset,
    history: &SupervisedDataset,
    harvest: &HarvestConfig,
) -> Result<Evaluation> {
    let series = forecast_series(ensemble, test)?;
    let dt = ensemble.horizon.seconds_f64();
    let actual = series.actuals();
    let (actual_v, actual_i, actual_p) = (column(&actual, 0), column(&actual, 1), column(&actual, 2));
    let actual_energy = interval_energies(&actual_v, &actual_i, dt, harvest)?;
    let starts = series.interval_starts();
    let coverage = interval_coverage(&series.forecasts, &actual)?;
    let crossing = quantile_crossing_rate(&series)?;

    let mut members = Vec::new();
    for q in Quantile::ALL {
        let v = series.column(q, 0);
        let i = series.column(q, 1);
        let p = series.column(q, 2);
        let m = [mape(&v, &actual_v)?, mape(&i, &actual_i)?, mape(&p, &actual_p)?];
        let forecast_energy = interval_energies(&v, &i, dt, harvest)?;
        let trace = simulate_schedule(&forecast_energy, &actual_energy, harvest)?.with_interval_starts(&starts)?;
        let report = MetricReport {
            mape_voltage: m[0].percent,
            mape_current: m[1].percent,
            mape_power: m[2].percent,
            mape_excluded: m.iter().map(|x| x.excluded).sum(),
            total_energy_error: total_energy_error(&p, &actual_p, dt)?,
            failed_activation_rate: trace.failed_rate(),
            missed_activation_rate: trace.missed_rate().unwrap_or(f64::NAN),
            predicted_activations: trace.totals.active_pred,
            possible_activations: trace.totals.max_active,
            coverage,
            crossing,
        };
        members.push(MemberEvaluation { quantile: q, report, trace });
    }

    let hist_v: Vec<f64> = history.targets().map(|t| t[0]).collect();
    let hist_i: Vec<f64> = history.targets().map(|t| t[1]).collect();
    let naive = naive_schedule(&hist_v, &hist_i, &actual_energy, dt, harvest)?.with_interval_starts(&starts)?;
    let oracle = oracle_max(&actual_energy, harvest);
    Ok(Evaluation { series, members, naive, oracle })
}

/// Activation counts of one schedule, for comparison tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleRow {
    pub label: String,
    pub attempts: u64,
    pub successful: u64,
    pub failed_percent: f64,
    pub missed_percent: f64,
}

impl ScheduleRow {
    pub fn from_trace(label: &str, trace: &SimulationTrace) -> Self {
        Self {
            label: label.to_string(),
            attempts: trace.totals.active_pred,
            successful: trace.totals.successful,
            failed_percent: trace.failed_rate() * 100.0,
            missed_percent: trace.missed_rate().map_or(f64::NAN, |r| r * 100.0),
        }
    }

    pub fn oracle(possible: u64) -> Self {
        Self {
            label: "oracle".into(),
            attempts: possible,
            successful: possible,
            failed_percent: 0.0,
            missed_percent: 0.0,
        }
    }
}

pub fn render_schedule_table(rows: &[ScheduleRow], possible: u64) -> String {
    let mut s = format!("Possible Activations = {possible}\n");
    s.push_str(&format!(
        "{:<10}{:>12}{:>12}{:>12}{:>12}\n",
        "schedule", "attempts", "successful", "failed %", "missed %"
    ));
    for r in rows {
        s.push_str(&format!(
            "{:<10}{:>12}{:>12}{:>12.3}{:>12.3}\n",
            r.label, r.attempts, r.successful, r.failed_percent, r.missed_percent
        ));
    }
    s
}

/// Median of a non-empty sample; the mean of the two middle values for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_by_hand() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[0.266, 0.897, 0.332, 0.631]), (0.332 + 0.631) / 2.0);
        assert_eq!(median(&[5.0, -1.0, 2.0]), 2.0);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn history_is_clamped_at_the_start() {
        use smfc_core::dataset::SupervisedWindow;
        let ds = SupervisedDataset {
            horizon: Horizon::Min3,
            deployment_start: 0.0,
            windows: (0..10)
                .map(|i| SupervisedWindow {
                    inputs: [[0.0; 8]; 4],
                    target: [i as f64; 3],
                    target_interval_start: i as f64,
                })
                .collect(),
        };
        let h = naive_history(&ds, 8, 2);
        assert_eq!(h.targets().map(|t| t[0]).collect::<Vec<_>>(), [6.0, 7.0]);
        assert_eq!(naive_history(&ds, 3, 5).len(), 3);
    }
}
