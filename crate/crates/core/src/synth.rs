//! Seeded synthetic SMFC traces: slow trend, diurnal cycle, soil moisture
//! events and heteroskedastic noise, sampled every 12-15 s.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{SampleRecord, SampleSeries, SECONDS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Epoch seconds of the first sample, also the deployment start.
    pub start: f64,
    pub days: f64,
    /// Sample spacing is uniform in `[cadence_min, cadence_max]` seconds.
    pub cadence_min: f64,
    pub cadence_max: f64,
    /// Volts.
    pub base_voltage: f64,
    /// Relative level change per day.
    pub trend_per_day: f64,
    /// Relative amplitude of the daily cycle.
    pub diurnal_amplitude: f64,
    /// Relative standard deviation of the slow noise process.
    pub noise_sigma: f64,
    /// How strongly the noise level swings over the day, in [0, 1).
    pub heteroskedasticity: f64,
    /// Seconds.
    pub noise_time_constant: f64,
    /// Relative white measurement noise per sample.
    pub measurement_noise: f64,
    /// External load in ohms; current is `V / R`.
    pub load_resistance: f64,
    /// Probability that a sample is a zero-voltage logger outage.
    pub outage_rate: f64,
    /// Linear decline of the level: `(start_fraction, total_drop)`. From
    /// `start_fraction` of the trace to its end the level falls by `total_drop`.
    pub decline: Option<(f64, f64)>,
    /// Every feature constant, no noise, no outages.
    pub constant: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            start: 1_622_505_600.0, // 2021-06-01T00:00:00Z
            days: 14.0,
            cadence_min: 12.0,
            cadence_max: 15.0,
            base_voltage: 0.45,
            trend_per_day: -0.004,
            diurnal_amplitude: 0.06,
            noise_sigma: 0.03,
            heteroskedasticity: 0.7,
            noise_time_constant: 900.0,
            measurement_noise: 0.004,
            load_resistance: 4700.0,
            outage_rate: 0.0005,
            decline: None,
            constant: false,
        }
    }
}

fn wave(seconds_of_day: f64, peak_hour: f64) -> f64 {
    (TAU * (seconds_of_day / 3600.0 - peak_hour + 6.0) / 24.0).sin()
}

/// Generates a sanitizable raw trace. Outage rows carry zero voltage, current
/// and power, like a logger dropout.
pub fn generate(config: &SynthConfig) -> SampleSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let duration = config.days * SECONDS_PER_DAY;
    let mut records = Vec::new();
    let mut t = 0.0;
    let mut ou = 0.0f64;
    let mut wetness = 0.0f64;
    let mut next_rain = rng.gen_range(0.5..3.0) * SECONDS_PER_DAY;
    let mut last_t = 0.0;

    while t < duration {
        let ts = config.start + t;
        let day_secs = ts.rem_euclid(SECONDS_PER_DAY);
        let record = if config.constant {
            let v = config.base_voltage;
            let i = v / config.load_resistance;
            SampleRecord {
                timestamp: ts,
                voltage: v,
                current: i,
                power: v * i,
                electrical_conductivity: 250.0,
                soil_temperature: 18.0,
                volumetric_water_content: 2400.0,
            }
        } else {
            let dt = t - last_t;
            last_t = t;
            if t >= next_rain {
                wetness += rng.gen_range(0.5..1.0);
                next_rain = t + rng.gen_range(1.5..4.0) * SECONDS_PER_DAY;
            }
            wetness *= (-dt / (1.5 * SECONDS_PER_DAY)).exp();

            let sigma = config.noise_sigma * (1.0 + config.heteroskedasticity * wave(day_secs, 15.0));
            let decay = (-dt / config.noise_time_constant).exp();
            let n: f64 = StandardNormal.sample(&mut rng);
            ou = ou * decay + sigma * (1.0 - decay * decay).sqrt() * n;

            let days = t / SECONDS_PER_DAY;
            let mut level = config.base_voltage * (1.0 + config.trend_per_day * days) * (1.0 + 0.08 * wetness);
            if let Some((from, drop)) = config.decline {
                let f = ((t / duration - from) / (1.0 - from)).clamp(0.0, 1.0);
                level *= 1.0 - drop * f;
            }
            let white: f64 = StandardNormal.sample(&mut rng);
            let v =
                level * (1.0 + config.diurnal_amplitude * wave(day_secs, 14.0) + ou + config.measurement_noise * white);
            let v = v.max(1e-4);
            let r_noise: f64 = StandardNormal.sample(&mut rng);
            let i = v / (config.load_resistance * (1.0 + 0.02 * r_noise));
            let temp = 18.0 + 4.0 * wave(day_secs, 16.0) - 2.0 * wetness;
            let vwc = 2300.0 + 300.0 * wetness.min(2.0);
            let ec = 200.0 + 0.25 * (vwc - 2300.0) + 2.0 * (temp - 18.0);
            if rng.gen_bool(config.outage_rate.clamp(0.0, 1.0)) {
                SampleRecord {
                    timestamp: ts,
                    voltage: 0.0,
                    current: 0.0,
                    power: 0.0,
                    electrical_conductivity: ec,
                    soil_temperature: temp,
                    volumetric_water_content: vwc,
                }
            } else {
                SampleRecord {
                    timestamp: ts,
                    voltage: v,
                    current: i,
                    power: v * i,
                    electrical_conductivity: ec,
                    soil_temperature: temp,
                    volumetric_water_content: vwc,
                }
            }
        };
        records.push(record);
        t += if config.cadence_max > config.cadence_min {
            rng.gen_range(config.cadence_min..config.cadence_max)
        } else {
            config.cadence_min
        };
    }
    SampleSeries::new(records, config.start).expect("generated timestamps increase")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let cfg = SynthConfig { days: 1.0, ..Default::default() };
        let a = generate(&cfg);
        assert_eq!(a, generate(&cfg));
        assert!(a.len() > 86_400 / 15);
        assert!(a.records().iter().all(|r| r.voltage >= 0.0 && r.volumetric_water_content > 0.0));
        let gaps = a.records().windows(2).map(|w| w[1].timestamp - w[0].timestamp);
        assert!(gaps.into_iter().all(|g| (12.0..=15.0).contains(&g)));
    }

    #[test]
    fn constant_mode() {
        let s = generate(&SynthConfig { days: 0.1, constant: true, ..Default::default() });
        assert!(s.records().iter().all(|r| r.voltage == 0.45 && r.soil_temperature == 18.0));
    }

    #[test]
    fn decline_lowers_the_tail() {
        let cfg = SynthConfig { days: 4.0, decline: Some((0.5, 0.3)), outage_rate: 0.0, ..Default::default() };
        let s = generate(&cfg);
        let n = s.len();
        let mean = |r: &[SampleRecord]| r.iter().map(|x| x.voltage).sum::<f64>() / r.len() as f64;
        let head = mean(&s.records()[n / 4..n / 2]);
        let tail = mean(&s.records()[n * 9 / 10..]);
        assert!(tail < 0.85 * head, "{head} {tail}");
    }
}
