use super::{DatasetError, Horizon, Interval, ResampledSeries, SECONDS_PER_DAY};

/// Input timesteps per window.
pub const SEQUENCE_LENGTH: usize = 4;
/// Features per timestep.
pub const FEATURE_COUNT: usize = 8;
/// Outputs per prediction: voltage, current, power.
pub const TARGET_COUNT: usize = 3;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["power", "voltage", "current", "ec", "temp", "vwc", "days_since_deployment", "hour_of_day"];

pub const TARGET_NAMES: [&str; TARGET_COUNT] = ["voltage", "current", "power"];

/// Four consecutive resampled intervals (oldest first) paired with the means
/// of the interval that follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedWindow {
    pub inputs: [[f64; FEATURE_COUNT]; SEQUENCE_LENGTH],
    /// Mean voltage, current and power of the target interval.
    pub target: [f64; TARGET_COUNT],
    pub target_interval_start: f64,
}

impl SupervisedWindow {
    /// Row-major `SEQUENCE_LENGTH x FEATURE_COUNT` view of the inputs.
    pub fn flat_inputs(&self) -> &[f64] {
        self.inputs.as_flattened()
    }
}

/// Windows for one horizon, ordered by target interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub horizon: Horizon,
    pub deployment_start: f64,
    pub windows: Vec<SupervisedWindow>,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Copies a contiguous range of windows into a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SupervisedDataset {
        SupervisedDataset {
            horizon: self.horizon,
            deployment_start: self.deployment_start,
            windows: self.windows[range].to_vec(),
        }
    }

    pub fn targets(&self) -> impl Iterator<Item = &[f64; TARGET_COUNT]> {
        self.windows.iter().map(|w| &w.target)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WindowReport {
    pub windows: usize,
    /// Candidate targets whose five-interval span touched a gap.
    pub dropped: usize,
}

fn hour_of_day(t: f64) -> f64 {
    t.rem_euclid(SECONDS_PER_DAY) / 3600.0
}

fn feature_row(iv: &Interval, deployment_start: f64) -> [f64; FEATURE_COUNT] {
    let m = iv.means.as_ref().expect("feature row of a missing interval");
    [
        m.power,
        m.voltage,
        m.current,
        m.ec,
        m.temp,
        m.vwc,
        (iv.start - deployment_start) / SECONDS_PER_DAY,
        hour_of_day(iv.start),
    ]
}

/// Builds one window per interval that has four present predecessors.
///
/// Calendar features are taken at each input timestep's interval start.
/// Features are left in raw units.
pub fn build_supervised(resampled: &ResampledSeries) -> Result<(SupervisedDataset, WindowReport), DatasetError> {
    let ivs = &resampled.intervals;
    let mut windows = Vec::new();
    let mut dropped = 0;
    for t in SEQUENCE_LENGTH..ivs.len() {
        let span = &ivs[t - SEQUENCE_LENGTH..=t];
        if span.iter().any(Interval::is_missing) {
            dropped += 1;
            continue;
        }
        let mut inputs = [[0.0; FEATURE_COUNT]; SEQUENCE_LENGTH];
        for (row, iv) in inputs.iter_mut().zip(span) {
            *row = feature_row(iv, resampled.deployment_start);
        }
        let m = ivs[t].means.as_ref().expect("checked present");
        windows.push(SupervisedWindow {
            inputs,
            target: [m.voltage, m.current, m.power],
            target_interval_start: ivs[t].start,
        });
    }
    if windows.is_empty() {
        return Err(DatasetError::InsufficientHistory { usable: 0 });
    }
    let report = WindowReport { windows: windows.len(), dropped };
    let dataset =
        SupervisedDataset { horizon: resampled.horizon, deployment_start: resampled.deployment_start, windows };
    Ok((dataset, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureMeans;

    pub(crate) fn series(present: &[bool]) -> ResampledSeries {
        let intervals = present
            .iter()
            .enumerate()
            .map(|(i, &p)| Interval {
                start: 7200.0 + i as f64 * 180.0,
                sample_count: if p { 15 } else { 0 },
                means: p.then_some(FeatureMeans {
                    voltage: i as f64,
                    current: 10.0 + i as f64,
                    power: 20.0 + i as f64,
                    ec: 1.0,
                    temp: 2.0,
                    vwc: 3.0,
                }),
            })
            .collect();
        ResampledSeries { horizon: Horizon::Min3, deployment_start: 0.0, intervals }
    }

    #[test]
    fn five_intervals_one_window() {
        let (ds, rep) = build_supervised(&series(&[true; 5])).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(rep.dropped, 0);
        let w = &ds.windows[0];
        assert_eq!(w.target, [4.0, 14.0, 24.0]);
        assert_eq!(w.target_interval_start, 7200.0 + 4.0 * 180.0);
        // oldest first; power comes first in the feature layout
        assert_eq!(w.inputs[0][1], 0.0);
        assert_eq!(w.inputs[3][1], 3.0);
        assert_eq!(w.inputs[0][0], 20.0);
        assert_eq!(w.inputs[0][6], 7200.0 / 86400.0);
        assert_eq!(w.inputs[0][7], 2.0);
        assert_eq!(w.inputs[1][7], 2.05);
    }

    #[test]
    fn ten_intervals_six_windows() {
        let (ds, _) = build_supervised(&series(&[true; 10])).unwrap();
        assert_eq!(ds.len(), 6);
    }

    #[test]
    fn gap_drops_spanning_windows() {
        let mut p = [true; 11];
        p[5] = false;
        let (ds, rep) = build_supervised(&series(&p)).unwrap();
        // targets 4 and 10 survive; 5..=9 touch the gap
        let targets: Vec<f64> = ds.windows.iter().map(|w| w.target[0]).collect();
        assert_eq!(targets, [4.0, 10.0]);
        assert_eq!(rep.dropped, 5);
    }

    #[test]
    fn insufficient_history() {
        assert!(matches!(build_supervised(&series(&[true; 4])), Err(DatasetError::InsufficientHistory { .. })));
        assert!(build_supervised(&series(&[true, true, false, true, true, true, true])).is_err());
    }
}
