use super::{DatasetError, Horizon, SampleSeries};

/// Per-interval means of every raw feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMeans {
    pub voltage: f64,
    pub current: f64,
    pub power: f64,
    pub ec: f64,
    pub temp: f64,
    pub vwc: f64,
}

/// One resampling bucket `[start, start + horizon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub sample_count: usize,
    /// `None` when no raw sample fell in the interval.
    pub means: Option<FeatureMeans>,
}

impl Interval {
    pub fn is_missing(&self) -> bool {
        self.means.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResampledSeries {
    pub horizon: Horizon,
    pub deployment_start: f64,
    pub intervals: Vec<Interval>,
}

impl ResampledSeries {
    pub fn present(&self) -> impl Iterator<Item = (&Interval, &FeatureMeans)> {
        self.intervals.iter().filter_map(|iv| iv.means.as_ref().map(|m| (iv, m)))
    }

    pub fn missing_count(&self) -> usize {
        self.intervals.iter().filter(|iv| iv.is_missing()).count()
    }
}

/// Averages raw samples into horizon-wide buckets anchored at the deployment
/// start. Empty buckets between the first and last sample are kept as gaps.
pub fn resample(series: &SampleSeries, horizon: Horizon) -> Result<ResampledSeries, DatasetError> {
    let records = series.records();
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Err(DatasetError::NoSamples);
    };
    let step = horizon.seconds_f64();
    let origin = series.deployment_start();
    let bucket = |t: f64| ((t - origin) / step).floor() as i64;
    let k0 = bucket(first.timestamp);
    let n = (bucket(last.timestamp) - k0 + 1) as usize;

    let mut sums = vec![[0.0f64; 6]; n];
    let mut counts = vec![0usize; n];
    for r in records {
        let k = (bucket(r.timestamp) - k0) as usize;
        let s = &mut sums[k];
        s[0] += r.voltage;
        s[1] += r.current;
        s[2] += r.power;
        s[3] += r.electrical_conductivity;
        s[4] += r.soil_temperature;
        s[5] += r.volumetric_water_content;
        counts[k] += 1;
    }

    let intervals = sums
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (s, &count))| {
            let means = (count > 0).then(|| {
                let c = count as f64;
                FeatureMeans {
                    voltage: s[0] / c,
                    current: s[1] / c,
                    power: s[2] / c,
                    ec: s[3] / c,
                    temp: s[4] / c,
                    vwc: s[5] / c,
                }
            });
            Interval { start: origin + (k0 + i as i64) as f64 * step, sample_count: count, means }
        })
        .collect();

    Ok(ResampledSeries { horizon, deployment_start: origin, intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SampleRecord;

    fn rec(t: f64, v: f64) -> SampleRecord {
        SampleRecord {
            timestamp: t,
            voltage: v,
            current: v * 2.0,
            power: v * 3.0,
            electrical_conductivity: 7.0,
            soil_temperature: 8.0,
            volumetric_water_content: 9.0,
        }
    }

    #[test]
    fn fifteen_samples_one_interval() {
        let recs: Vec<_> = (0..15).map(|i| rec(i as f64 * 12.0, 0.1 * (i + 1) as f64)).collect();
        let expected = recs.iter().map(|r| r.voltage).sum::<f64>() / 15.0;
        let s = SampleSeries::new(recs, 0.0).unwrap();
        let r = resample(&s, Horizon::Min3).unwrap();
        assert_eq!(r.intervals.len(), 1);
        assert_eq!(r.intervals[0].sample_count, 15);
        assert_eq!(r.intervals[0].means.unwrap().voltage, expected);
    }

    #[test]
    fn empty_buckets_are_gaps() {
        let s = SampleSeries::new(vec![rec(0.0, 1.0), rec(400.0, 2.0)], 0.0).unwrap();
        let r = resample(&s, Horizon::Min3).unwrap();
        assert_eq!(r.intervals.len(), 3);
        assert!(r.intervals[1].is_missing());
        assert_eq!(r.intervals[1].sample_count, 0);
        assert_eq!(r.intervals[2].start, 360.0);
        assert_eq!(r.missing_count(), 1);
    }

    #[test]
    fn anchored_at_deployment_start() {
        let s = SampleSeries::new(vec![rec(1000.0, 1.0), rec(1100.0, 3.0)], 50.0).unwrap();
        let r = resample(&s, Horizon::Min5).unwrap();
        assert_eq!(r.intervals[0].start, 950.0);
        assert_eq!(r.intervals.len(), 1);
        assert_eq!(r.intervals[0].means.unwrap().voltage, 2.0);
    }
}
