//! Forecast and scheduling scores.

use std::fmt::Write as _;

use crate::dataset::TARGET_COUNT;
use crate::forecast::QuantileForecast;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} predictions vs {1} actuals")]
    Misaligned(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("MAPE undefined: zero actuals")]
    AllActualsZero,
    #[error("total actual energy must be positive, got {0} J")]
    NonPositiveEnergy(f64),
    #[error("interval must be positive, got {0} s")]
    BadInterval(f64),
    #[error("{failed} failures exceed {scheduled} scheduled activations")]
    FailedExceedsScheduled { failed: u64, scheduled: u64 },
    #[error("missed activations {missed} outside [0, {max_possible}]")]
    BadMissed { missed: u64, max_possible: u64 },
}

/// Actuals with magnitude below this are left out of MAPE.
pub const MAPE_ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mape {
    pub percent: f64,
    pub included: usize,
    pub excluded: usize,
}

fn check_aligned(predicted: &[f64], actual: &[f64]) -> Result<(), MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::Misaligned(predicted.len(), actual.len()));
    }
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Mean absolute percent error, skipping (and counting) near-zero actuals.
pub fn mape(predicted: &[f64], actual: &[f64]) -> Result<Mape, MetricsError> {
    check_aligned(predicted, actual)?;
    let mut sum = 0.0;
    let mut included = 0;
    for (&p, &a) in predicted.iter().zip(actual) {
        if a.abs() < MAPE_ZERO_THRESHOLD {
            continue;
        }
        sum += (a - p).abs() / a.abs();
        included += 1;
    }
    if included == 0 {
        return Err(MetricsError::AllActualsZero);
    }
    Ok(Mape { percent: sum / included as f64 * 100.0, included, excluded: actual.len() - included })
}

/// Signed percent difference between predicted and actual total energy.
/// Negative means the forecast underestimated. The interval length cancels,
/// so it is factored out and the result does not depend on it.
pub fn total_energy_error(predicted_power: &[f64], actual_power: &[f64], interval: f64) -> Result<f64, MetricsError> {
    check_aligned(predicted_power, actual_power)?;
    if !(interval > 0.0) {
        return Err(MetricsError::BadInterval(interval));
    }
    let predicted: f64 = predicted_power.iter().sum();
    let actual: f64 = actual_power.iter().sum();
    if !(actual > 0.0) {
        return Err(MetricsError::NonPositiveEnergy(actual * interval));
    }
    Ok((predicted - actual) / actual * 100.0)
}

/// `failed / scheduled`, zero when nothing was scheduled.
pub fn failed_activation_rate(failed: u64, scheduled: u64) -> Result<f64, MetricsError> {
    if failed > scheduled {
        return Err(MetricsError::FailedExceedsScheduled { failed, scheduled });
    }
    if scheduled == 0 {
        return Ok(0.0);
    }
    Ok(failed as f64 / scheduled as f64)
}

pub fn missed_activation_rate(missed: u64, max_possible: u64) -> Result<f64, MetricsError> {
    if max_possible == 0 || missed > max_possible {
        return Err(MetricsError::BadMissed { missed, max_possible });
    }
    Ok(missed as f64 / max_possible as f64)
}

/// Fraction of points whose actual value lies within `[lower, upper]`, per output.
pub fn interval_coverage(
    forecasts: &[QuantileForecast],
    actual: &[[f64; TARGET_COUNT]],
) -> Result<[f64; TARGET_COUNT], MetricsError> {
    if forecasts.len() != actual.len() {
        return Err(MetricsError::Misaligned(forecasts.len(), actual.len()));
    }
    if forecasts.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut inside = [0usize; TARGET_COUNT];
    for (f, a) in forecasts.iter().zip(actual) {
        for k in 0..TARGET_COUNT {
            if f.lower[k] <= a[k] && a[k] <= f.upper[k] {
                inside[k] += 1;
            }
        }
    }
    Ok(inside.map(|n| n as f64 / forecasts.len() as f64))
}

/// Scores for one quantile model over a test span, plus ensemble diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Percent.
    pub mape_voltage: f64,
    pub mape_current: f64,
    pub mape_power: f64,
    /// Points left out of MAPE because the actual was ~0, summed over outputs.
    pub mape_excluded: usize,
    /// Signed percent.
    pub total_energy_error: f64,
    /// Fractions in [0, 1].
    pub failed_activation_rate: f64,
    pub missed_activation_rate: f64,
    pub predicted_activations: u64,
    pub possible_activations: u64,
    /// Diagnostic: fraction of actuals inside the ensemble's interval, per output.
    pub coverage: [f64; TARGET_COUNT],
    /// Diagnostic: quantile crossing rate per output.
    pub crossing: [f64; TARGET_COUNT],
}

impl MetricReport {
    /// `Name = value` lines; the first six names match the evaluation table rows.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        for (name, value) in self.rows() {
            let _ = writeln!(s, "{name} = {value}");
        }
        s
    }

    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let pct = |x: f64| format!("{x:.3}");
        vec![
            ("Predicted Activations", self.predicted_activations.to_string()),
            ("Possible Activations", self.possible_activations.to_string()),
            ("Failed Activations (%)", pct(self.failed_activation_rate * 100.0)),
            ("Missed Activations (%)", pct(self.missed_activation_rate * 100.0)),
            ("Total Energy Error", pct(self.total_energy_error)),
            ("Test MAPE Power", pct(self.mape_power)),
            ("Test MAPE Voltage", pct(self.mape_voltage)),
            ("Test MAPE Current", pct(self.mape_current)),
            ("MAPE Excluded Points", self.mape_excluded.to_string()),
            ("Coverage Voltage (diagnostic)", format!("{:.4}", self.coverage[0])),
            ("Coverage Current (diagnostic)", format!("{:.4}", self.coverage[1])),
            ("Coverage Power (diagnostic)", format!("{:.4}", self.coverage[2])),
            ("Crossing Rate Voltage (diagnostic)", format!("{:.4}", self.crossing[0])),
            ("Crossing Rate Current (diagnostic)", format!("{:.4}", self.crossing[1])),
            ("Crossing Rate Power (diagnostic)", format!("{:.4}", self.crossing[2])),
        ]
    }
}

/// Renders several labelled reports side by side, one row per metric.
pub fn render_table(columns: &[(&str, &MetricReport)]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<36}", "Metric");
    for (label, _) in columns {
        let _ = write!(s, "{label:>14}");
    }
    s.push('\n');
    let rows: Vec<_> = columns.iter().map(|(_, r)| r.rows()).collect();
    if let Some(first) = rows.first() {
        for (i, (name, _)) in first.iter().enumerate() {
            let _ = write!(s, "{name:<36}");
            for r in &rows {
                let _ = write!(s, "{:>14}", r[i].1);
            }
            s.push('\n');
        }
    }
    s
}
