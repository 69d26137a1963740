use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};

use super::{DatasetError, SampleRecord, SampleSeries};

/// Gaps longer than this between consecutive samples are reported.
pub const NOMINAL_MAX_GAP_SECS: f64 = 15.0;

const COLUMNS: [&str; 7] = ["timestamp", "voltage", "current", "power", "ec", "temp", "vwc"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub rows_read: usize,
    pub rows_skipped: usize,
    /// Rows dropped because an earlier row carried the same timestamp.
    pub duplicates_dropped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SanitizeReport {
    pub removed: usize,
}

/// A stretch between two consecutive samples longer than the nominal cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap {
    pub after: f64,
    pub before: f64,
}

impl Gap {
    pub fn duration(&self) -> f64 {
        self.before - self.after
    }
}

/// Parses an epoch-seconds number or an ISO-8601 / RFC 3339 timestamp.
///
/// Timestamps without an offset are taken as UTC.
pub fn parse_timestamp(field: &str) -> Result<f64, DatasetError> {
    let field = field.trim();
    if let Ok(v) = field.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
        return Ok(epoch_seconds(dt.timestamp(), dt.timestamp_subsec_nanos()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(field, fmt) {
            let dt = dt.and_utc();
            return Ok(epoch_seconds(dt.timestamp(), dt.timestamp_subsec_nanos()));
        }
    }
    Err(DatasetError::InvalidTimestamp(field.to_string()))
}

fn epoch_seconds(secs: i64, nanos: u32) -> f64 {
    secs as f64 + f64::from(nanos) * 1e-9
}

/// Reads a delimited trace with header `timestamp,voltage,current,power,ec,temp,vwc`.
///
/// Column order is free and extra columns are ignored. Lines starting with `#`
/// are comments. Rows with an unparsable field, or a negative voltage, power,
/// conductivity or water content, are skipped and counted. Records come back
/// sorted by timestamp. When `deployment_start` is `None` the first record's
/// timestamp is used.
pub fn parse_samples<R: Read>(
    source: R,
    deployment_start: Option<f64>,
) -> Result<(SampleSeries, ParseReport), DatasetError> {
    let mut reader =
        csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).comment(Some(b'#')).from_reader(source);

    let headers = reader.headers().map_err(|e| DatasetError::Read(e.to_string()))?.clone();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(DatasetError::NoSamples);
    }
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers.iter().position(|h| h.eq_ignore_ascii_case(name)).ok_or(DatasetError::MissingColumn(name))?;
    }

    let mut report = ParseReport::default();
    let mut records = Vec::new();
    for row in reader.records() {
        report.rows_read += 1;
        let parsed = row.ok().and_then(|row| {
            let field = |i: usize| row.get(index[i]);
            let timestamp = parse_timestamp(field(0)?).ok()?;
            let mut values = [0.0; 6];
            for (k, v) in values.iter_mut().enumerate() {
                *v = field(k + 1)?.parse::<f64>().ok().filter(|x| x.is_finite())?;
            }
            let [voltage, current, power, ec, temp, vwc] = values;
            if voltage < 0.0 || power < 0.0 || ec < 0.0 || vwc < 0.0 {
                return None;
            }
            Some(SampleRecord {
                timestamp,
                voltage,
                current,
                power,
                electrical_conductivity: ec,
                soil_temperature: temp,
                volumetric_water_content: vwc,
            })
        });
        match parsed {
            Some(r) => records.push(r),
            None => report.rows_skipped += 1,
        }
    }
    if records.is_empty() {
        return Err(DatasetError::NoSamples);
    }

    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    let before = records.len();
    records.dedup_by(|later, earlier| later.timestamp == earlier.timestamp);
    report.duplicates_dropped = before - records.len();

    let start = deployment_start.unwrap_or(records[0].timestamp);
    Ok((SampleSeries::new(records, start)?, report))
}

pub fn read_samples_file(
    path: &Path,
    deployment_start: Option<f64>,
) -> Result<(SampleSeries, ParseReport), DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::Read(format!("{}: {e}", path.display())))?;
    parse_samples(std::io::BufReader::new(file), deployment_start)
}

/// Writes records in the same format [`parse_samples`] reads, with epoch
/// timestamps. Values use shortest round-trip formatting, so re-parsing
/// reproduces the series exactly.
pub fn write_samples<W: Write>(series: &SampleSeries, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in series.records() {
        w.write_record(
            [
                r.timestamp,
                r.voltage,
                r.current,
                r.power,
                r.electrical_conductivity,
                r.soil_temperature,
                r.volumetric_water_content,
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()
}

/// Drops records whose voltage is exactly zero (logger outage sentinel).
pub fn sanitize(series: &SampleSeries) -> Result<(SampleSeries, SanitizeReport), DatasetError> {
    let kept: Vec<SampleRecord> = series.records().iter().filter(|r| r.voltage != 0.0).copied().collect();
    if kept.is_empty() {
        return Err(DatasetError::EmptyAfterSanitize);
    }
    let report = SanitizeReport { removed: series.len() - kept.len() };
    let cleaned = SampleSeries::new(kept, series.deployment_start())?;
    Ok((cleaned, report))
}

/// Lists every inter-sample gap longer than `max_gap` seconds.
pub fn find_gaps(series: &SampleSeries, max_gap: f64) -> Vec<Gap> {
    series
        .records()
        .windows(2)
        .filter(|w| w[1].timestamp - w[0].timestamp > max_gap)
        .map(|w| Gap { after: w[0].timestamp, before: w[1].timestamp })
        .collect()
}
