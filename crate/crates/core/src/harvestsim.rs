//! Stored-energy ledger for an intermittently active device.
//!
//! Each interval the scheduler plans `floor((stored + forecast) / E_act)`
//! activations, then the interval's real energy arrives and the planned
//! activations are attempted in turn. An attempt without enough stored energy
//! fails and the remaining charge is lost. The oracle reference spends the
//! whole test span's energy perfectly; the naive baseline forecasts a constant
//! energy from the historical mean voltage.

use std::fmt;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum HarvestError {
    #[error("negative voltage {0} V")]
    NegativeVoltage(f64),
    #[error("interval must be positive, got {0} s")]
    BadInterval(f64),
    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    Misaligned { what: &'static str, got: usize, expected: usize },
    #[error("negative or non-finite energy {0} J")]
    BadEnergy(f64),
    #[error("empty history")]
    EmptyHistory,
    #[error("invalid harvest configuration: {0}")]
    Config(String),
    #[error("unknown energy model `{0}` (expected matched_load or measured_vi)")]
    UnknownEnergyModel(String),
}

/// How a voltage (and current) trace is turned into harvestable energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyModel {
    /// `eta * V^2 / (4 R_int)`: maximum power transfer through the cell's
    /// internal resistance, from voltage alone.
    #[default]
    MatchedLoad,
    /// `eta * V * I` from measured voltage and current.
    MeasuredVi,
}

impl fmt::Display for EnergyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnergyModel::MatchedLoad => "matched_load",
            EnergyModel::MeasuredVi => "measured_vi",
        })
    }
}

impl std::str::FromStr for EnergyModel {
    type Err = HarvestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "matched_load" => Ok(EnergyModel::MatchedLoad),
            "measured_vi" => Ok(EnergyModel::MeasuredVi),
            other => Err(HarvestError::UnknownEnergyModel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestConfig {
    /// Ohms.
    pub internal_resistance: f64,
    /// Flat harvester efficiency in (0, 1].
    pub efficiency: f64,
    /// Joules per activation.
    pub activation_energy: f64,
    pub energy_model: EnergyModel,
    /// Joules in storage before the first interval.
    pub initial_stored_energy: f64,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self {
            internal_resistance: 6926.0,
            efficiency: 0.60,
            activation_energy: 3.9e-6,
            energy_model: EnergyModel::MatchedLoad,
            initial_stored_energy: 0.0,
        }
    }
}

impl HarvestConfig {
    pub fn validate(&self) -> Result<(), HarvestError> {
        if !(self.internal_resistance > 0.0) {
            return Err(HarvestError::Config("internal resistance must be positive".into()));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(HarvestError::Config("efficiency must be in (0, 1]".into()));
        }
        if !(self.activation_energy > 0.0) {
            return Err(HarvestError::Config("activation energy must be positive".into()));
        }
        if !(self.initial_stored_energy >= 0.0) {
            return Err(HarvestError::Config("initial stored energy must be non-negative".into()));
        }
        Ok(())
    }
}

/// Harvestable power in watts from a cell voltage, matched-load model.
pub fn usable_power(voltage: f64, config: &HarvestConfig) -> Result<f64, HarvestError> {
    if voltage < 0.0 || !voltage.is_finite() {
        return Err(HarvestError::NegativeVoltage(voltage));
    }
    Ok(config.efficiency * voltage * voltage / (4.0 * config.internal_resistance))
}

/// `eta * sum(V_t * I_t) * dt` in joules.
pub fn usable_energy_vi(
    voltages: &[f64],
    currents: &[f64],
    interval: f64,
    config: &HarvestConfig,
) -> Result<f64, HarvestError> {
    check_interval(interval)?;
    check_len("currents", currents.len(), voltages.len())?;
    let sum: f64 = voltages.iter().zip(currents).map(|(v, i)| v * i).sum();
    Ok(config.efficiency * sum * interval)
}

/// Energy per interval for aligned voltage/current means under the configured
/// energy model. Negative values (possible in model predictions) are treated
/// as no harvest.
pub fn interval_energies(
    voltages: &[f64],
    currents: &[f64],
    interval: f64,
    config: &HarvestConfig,
) -> Result<Vec<f64>, HarvestError> {
    check_interval(interval)?;
    check_len("currents", currents.len(), voltages.len())?;
    voltages
        .iter()
        .zip(currents)
        .map(|(&v, &i)| {
            let (v, i) = (v.max(0.0), i.max(0.0));
            match config.energy_model {
                EnergyModel::MatchedLoad => Ok(usable_power(v, config)? * interval),
                EnergyModel::MeasuredVi => Ok(config.efficiency * v * i * interval),
            }
        })
        .collect()
}

/// Activations a perfect scheduler could fund from the total energy.
pub fn oracle_max(energies: &[f64], config: &HarvestConfig) -> u64 {
    let total: f64 = energies.iter().sum();
    (total / config.activation_energy).floor().max(0.0) as u64
}

/// Largest `n` with `n * e_act <= budget` in floating point. Planning and
/// execution both use this test, so a forecast that never exceeds the real
/// income can never schedule an unaffordable attempt.
fn affordable(budget: f64, e_act: f64) -> u64 {
    if !(budget >= e_act) {
        return 0;
    }
    let mut n = (budget / e_act).floor() as u64;
    while n > 0 && n as f64 * e_act > budget {
        n -= 1;
    }
    while (n + 1) as f64 * e_act <= budget {
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub interval_start: f64,
    pub forecast: f64,
    pub harvested: f64,
    pub scheduled_activations: u64,
    pub successful_activations: u64,
    pub failed_attempts: u64,
    pub consumed: f64,
    pub wasted: f64,
    pub stored_after: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    /// Scheduled attempts.
    pub active_pred: u64,
    pub failed_active: u64,
    pub successful: u64,
    pub missed_active: u64,
    pub max_active: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub initial_stored: f64,
    pub ledger: Vec<LedgerEntry>,
    pub totals: Totals,
}

impl SimulationTrace {
    pub fn failed_rate(&self) -> f64 {
        crate::metrics::failed_activation_rate(self.totals.failed_active, self.totals.active_pred)
            .expect("failures never exceed attempts")
    }

    /// `None` when the oracle could not fund a single activation.
    pub fn missed_rate(&self) -> Option<f64> {
        crate::metrics::missed_activation_rate(self.totals.missed_active, self.totals.max_active).ok()
    }

    pub fn final_stored(&self) -> f64 {
        self.ledger.last().map_or(self.initial_stored, |e| e.stored_after)
    }

    /// Replaces the default interval indices with real interval start times.
    pub fn with_interval_starts(mut self, starts: &[f64]) -> Result<Self, HarvestError> {
        check_len("interval starts", starts.len(), self.ledger.len())?;
        self.ledger.iter_mut().zip(starts).for_each(|(e, &s)| e.interval_start = s);
        Ok(self)
    }

    /// One row per interval followed by a `#`-prefixed totals block.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "interval_start,forecast_j,harvested_j,scheduled,successful,failed,consumed_j,wasted_j,stored_after_j"
        )?;
        for e in &self.ledger {
            writeln!(
                out,
                "{},{:e},{:e},{},{},{},{:e},{:e},{:e}",
                e.interval_start,
                e.forecast,
                e.harvested,
                e.scheduled_activations,
                e.successful_activations,
                e.failed_attempts,
                e.consumed,
                e.wasted,
                e.stored_after
            )?;
        }
        for line in self.totals_block().lines() {
            writeln!(out, "# {line}")?;
        }
        Ok(())
    }

    /// Totals using the evaluation table's row names.
    pub fn totals_block(&self) -> String {
        let t = &self.totals;
        let missed = self.missed_rate().map_or("undefined".to_string(), |r| format!("{:.3}", r * 100.0));
        format!(
            "Predicted Activations = {}\nSuccessful Activations = {}\nPossible Activations = {}\nFailed Activations (%) = {:.3}\nMissed Activations (%) = {}\n",
            t.active_pred,
            t.successful,
            t.max_active,
            self.failed_rate() * 100.0,
            missed
        )
    }
}

fn check_interval(interval: f64) -> Result<(), HarvestError> {
    if interval > 0.0 && interval.is_finite() {
        Ok(())
    } else {
        Err(HarvestError::BadInterval(interval))
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<(), HarvestError> {
    if got == expected {
        Ok(())
    } else {
        Err(HarvestError::Misaligned { what, got, expected })
    }
}

fn check_energies(e: &[f64]) -> Result<(), HarvestError> {
    match e.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        Some(&bad) => Err(HarvestError::BadEnergy(bad)),
        None => Ok(()),
    }
}

/// Runs the ledger with forecast income used for planning and actual income
/// used for execution.
pub fn simulate_schedule(
    forecast: &[f64],
    actual: &[f64],
    config: &HarvestConfig,
) -> Result<SimulationTrace, HarvestError> {
    config.validate()?;
    check_len("actual energies", actual.len(), forecast.len())?;
    check_energies(forecast)?;
    check_energies(actual)?;
    let e_act = config.activation_energy;

    let mut stored = config.initial_stored_energy;
    let mut ledger = Vec::with_capacity(forecast.len());
    let mut totals = Totals::default();
    for (t, (&f, &a)) in forecast.iter().zip(actual).enumerate() {
        let scheduled = affordable(stored + f, e_act);
        stored += a;
        let fundable = affordable(stored, e_act);
        let successful = scheduled.min(fundable);
        let consumed = successful as f64 * e_act;
        let (failed, wasted) = if scheduled > successful { (1, stored - consumed) } else { (0, 0.0) };
        stored = if failed == 1 { 0.0 } else { stored - consumed };
        totals.active_pred += successful + failed;
        totals.successful += successful;
        totals.failed_active += failed;
        ledger.push(LedgerEntry {
            interval_start: t as f64,
            forecast: f,
            harvested: a,
            scheduled_activations: scheduled,
            successful_activations: successful,
            failed_attempts: failed,
            consumed,
            wasted,
            stored_after: stored,
        });
    }
    totals.max_active = oracle_max(actual, config);
    totals.missed_active = totals.max_active.saturating_sub(totals.successful);
    Ok(SimulationTrace { initial_stored: config.initial_stored_energy, ledger, totals })
}

/// Constant per-interval income the naive baseline expects, derived from the
/// mean voltage (and, for [`EnergyModel::MeasuredVi`], mean current) of the
/// history window.
pub fn naive_forecast_energy(
    history_voltages: &[f64],
    history_currents: &[f64],
    interval: f64,
    config: &HarvestConfig,
) -> Result<f64, HarvestError> {
    if history_voltages.is_empty() {
        return Err(HarvestError::EmptyHistory);
    }
    check_len("history currents", history_currents.len(), history_voltages.len())?;
    let n = history_voltages.len() as f64;
    let mean_v = history_voltages.iter().sum::<f64>() / n;
    let mean_i = history_currents.iter().sum::<f64>() / n;
    Ok(interval_energies(&[mean_v], &[mean_i], interval, config)?[0])
}

/// Schedules the test span against a constant forecast from the history window.
pub fn naive_schedule(
    history_voltages: &[f64],
    history_currents: &[f64],
    actual: &[f64],
    interval: f64,
    config: &HarvestConfig,
) -> Result<SimulationTrace, HarvestError> {
    let per_interval = naive_forecast_energy(history_voltages, history_currents, interval, config)?;
    simulate_schedule(&vec![per_interval; actual.len()], actual, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = 3.9e-6;

    #[test]
    fn matched_load_power() {
        let c = HarvestConfig::default();
        assert_eq!(usable_power(0.0, &c).unwrap(), 0.0);
        let p = usable_power(0.5, &c).unwrap();
        assert!((p - 0.6 * 0.25 / 27_704.0).abs() < 1e-18);
        assert!((p - 5.414e-6).abs() < 1e-9);
        let p2 = usable_power(1.0, &c).unwrap();
        assert!((p2 / p - 4.0).abs() < 1e-12);
        assert!(usable_power(-0.1, &c).is_err());
    }

    #[test]
    fn vi_energy() {
        let c = HarvestConfig::default();
        let e = usable_energy_vi(&[1.0], &[1e-6], 180.0, &c).unwrap();
        assert!((e - 1.08e-4).abs() < 1e-18);
        assert_eq!(usable_energy_vi(&[0.4, 0.5], &[0.0, 0.0], 180.0, &c).unwrap(), 0.0);
        assert!(usable_energy_vi(&[1.0], &[1.0], -1.0, &c).is_err());
    }

    #[test]
    fn oracle_floor() {
        let c = HarvestConfig::default();
        assert_eq!(oracle_max(&[10e-6, 13.49e-6], &c), 6);
        assert_eq!(oracle_max(&[1e-6], &c), 0);
    }

    #[test]
    fn exact_forecast_spends_everything() {
        let t = simulate_schedule(&[2.0 * E], &[2.0 * E], &HarvestConfig::default()).unwrap();
        let e = t.ledger[0];
        assert_eq!((e.scheduled_activations, e.successful_activations, e.failed_attempts), (2, 2, 0));
        assert_eq!(e.stored_after, 0.0);
    }

    #[test]
    fn overforecast_fails_and_wastes_remainder() {
        let t = simulate_schedule(&[2.0 * E], &[1.5 * E], &HarvestConfig::default()).unwrap();
        let e = t.ledger[0];
        assert_eq!((e.scheduled_activations, e.successful_activations, e.failed_attempts), (2, 1, 1));
        assert!((e.wasted - 0.5 * E).abs() < 1e-20);
        assert_eq!(e.stored_after, 0.0);
        assert_eq!(t.totals.active_pred, 2);
        assert_eq!(t.failed_rate(), 0.5);
    }

    #[test]
    fn zero_forecast_below_one_activation() {
        let actual = [0.2 * E, 0.3 * E, 0.4 * E];
        let t = simulate_schedule(&[0.0; 3], &actual, &HarvestConfig::default()).unwrap();
        assert_eq!(t.totals.active_pred, 0);
        assert_eq!(t.totals.failed_active, 0);
        assert_eq!(t.totals.missed_active, t.totals.max_active);
        assert!((t.final_stored() - 0.9 * E).abs() < 1e-20);
    }

    #[test]
    fn zero_forecast_still_spends_banked_energy() {
        // Planning counts stored energy, so banked income is eventually used.
        let actual = [1.3 * E, 0.9 * E, 2.2 * E];
        let t = simulate_schedule(&[0.0; 3], &actual, &HarvestConfig::default()).unwrap();
        let scheduled: Vec<u64> = t.ledger.iter().map(|e| e.scheduled_activations).collect();
        assert_eq!(scheduled, [0, 1, 1]);
        assert_eq!(t.totals.failed_active, 0);
        assert_eq!(t.totals.max_active, 4);
        assert_eq!(t.totals.missed_active, 2);
    }

    #[test]
    fn misaligned_inputs() {
        assert!(matches!(
            simulate_schedule(&[1.0], &[1.0, 2.0], &HarvestConfig::default()),
            Err(HarvestError::Misaligned { .. })
        ));
    }

    #[test]
    fn naive_constant_history_matches_test() {
        let c = HarvestConfig::default();
        let v = 0.05;
        let actual = vec![usable_power(v, &c).unwrap() * 180.0; 50];
        let t = naive_schedule(&[v; 50], &[0.0; 50], &actual, 180.0, &c).unwrap();
        assert_eq!(t.totals.failed_active, 0);
        assert!(t.totals.missed_active <= 1);
    }

    #[test]
    fn naive_doubled_history_fails() {
        let c = HarvestConfig::default();
        let actual = vec![usable_power(0.05, &c).unwrap() * 180.0; 50];
        let fc = naive_forecast_energy(&[0.1; 10], &[0.0; 10], 180.0, &c).unwrap();
        assert!((fc / actual[0] - 4.0).abs() < 1e-12);
        let t = naive_schedule(&[0.1; 10], &[0.0; 10], &actual, 180.0, &c).unwrap();
        assert!(t.totals.failed_active >= 1);
        assert!(naive_schedule(&[], &[], &actual, 180.0, &c).is_err());
    }

    #[test]
    fn affordable_is_exact_at_multiples() {
        for k in 0..200u64 {
            let budget = k as f64 * E;
            assert_eq!(affordable(budget, E), k);
        }
    }

    #[test]
    fn energy_model_parse() {
        assert_eq!("measured_vi".parse::<EnergyModel>().unwrap(), EnergyModel::MeasuredVi);
        assert!("solar".parse::<EnergyModel>().is_err());
    }
}
