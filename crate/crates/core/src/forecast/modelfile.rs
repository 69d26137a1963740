//! Binary ensemble container.
//!
//! ```text
//! magic            8 bytes  "SMFCQENS"
//! version          u32
//! horizon          u32      seconds
//! input, hidden, output, sequence sizes   4 x u32
//! fingerprint      u32 length + UTF-8
//! metadata         u32 length + UTF-8 `key=value` lines
//! 3 x member       quantile f64, seed u64, epochs_run u64, best_epoch u64,
//!                  first/final train loss f64, best val loss f64,
//!                  parameter count u64, parameters f64...
//! checksum         u32      CRC-32 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{ForecastError, QuantileEnsemble};
use crate::dataset::Horizon;
use crate::neural::{Layout, LstmWeights, ModelConfig, TrainedModel, TrainingSummary};

pub const MAGIC: &[u8; 8] = b"SMFCQENS";
pub const FORMAT_VERSION: u32 = 1;

struct Encoder(Vec<u8>);

impl Encoder {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ForecastError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ForecastError::Corrupt(format!("unexpected end of data at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u32(&mut self) -> Result<u32, ForecastError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, ForecastError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, ForecastError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, ForecastError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| ForecastError::Corrupt(e.to_string()))
    }
}

fn encode(ensemble: &QuantileEnsemble) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    e.0.extend_from_slice(MAGIC);
    e.u32(FORMAT_VERSION);
    e.u32(ensemble.horizon.seconds() as u32);
    let c = &ensemble.median.config;
    for size in [c.input_size, c.hidden_size, c.output_size, c.sequence_length] {
        e.u32(size as u32);
    }
    e.str(&ensemble.fingerprint);
    let meta: String = ensemble.metadata.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    e.str(&meta);
    for m in [&ensemble.lower, &ensemble.median, &ensemble.upper] {
        e.f64(m.config.quantile);
        e.u64(m.config.seed);
        e.u64(m.summary.epochs_run as u64);
        e.u64(m.summary.best_epoch as u64);
        e.f64(m.summary.first_train_loss);
        e.f64(m.summary.final_train_loss);
        e.f64(m.summary.best_val_loss);
        e.u64(m.weights.params().len() as u64);
        for &p in m.weights.params() {
            e.f64(p);
        }
    }
    let crc = crc32fast::hash(&e.0);
    e.u32(crc);
    e.0
}

fn decode(bytes: &[u8]) -> Result<QuantileEnsemble, ForecastError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(ForecastError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(ForecastError::Checksum);
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if found != FORMAT_VERSION {
        return Err(ForecastError::Version { found, expected: FORMAT_VERSION });
    }
    if bytes.len() < 16 {
        return Err(ForecastError::Checksum);
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(ForecastError::Checksum);
    }

    let mut d = Decoder { buf: body, pos: 12 };
    let horizon = Horizon::from_seconds(u64::from(d.u32()?)).map_err(|e| ForecastError::Corrupt(e.to_string()))?;
    let mut sizes = [0usize; 4];
    for s in &mut sizes {
        *s = d.u32()? as usize;
    }
    let [input_size, hidden_size, output_size, sequence_length] = sizes;
    let fingerprint = d.str()?;
    let metadata: BTreeMap<String, String> =
        d.str()?.lines().filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string()))).collect();

    let mut member = || -> Result<TrainedModel, ForecastError> {
        let quantile = d.f64()?;
        let seed = d.u64()?;
        let summary = TrainingSummary {
            epochs_run: d.u64()? as usize,
            best_epoch: d.u64()? as usize,
            first_train_loss: d.f64()?,
            final_train_loss: d.f64()?,
            best_val_loss: d.f64()?,
        };
        let config = ModelConfig { input_size, hidden_size, output_size, sequence_length, quantile, seed };
        config.validate()?;
        let n = d.u64()? as usize;
        let layout = Layout::of(&config);
        if n != layout.len() {
            return Err(ForecastError::Corrupt(format!("{n} parameters, layout needs {}", layout.len())));
        }
        let params = (0..n).map(|_| d.f64()).collect::<Result<Vec<_>, _>>()?;
        Ok(TrainedModel { config, weights: LstmWeights::from_params(layout, params)?, summary })
    };
    let lower = member()?;
    let median = member()?;
    let upper = member()?;
    if d.pos != body.len() {
        return Err(ForecastError::Corrupt("trailing bytes after last member".into()));
    }
    Ok(QuantileEnsemble { horizon, lower, median, upper, fingerprint, metadata })
}

pub fn write_ensemble<W: Write>(ensemble: &QuantileEnsemble, mut out: W) -> Result<(), ForecastError> {
    out.write_all(&encode(ensemble))?;
    out.flush()?;
    Ok(())
}

pub fn read_ensemble<R: Read>(mut source: R) -> Result<QuantileEnsemble, ForecastError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn save_ensemble(ensemble: &QuantileEnsemble, path: &Path) -> Result<(), ForecastError> {
    write_ensemble(ensemble, BufWriter::new(File::create(path)?))
}

pub fn load_ensemble(path: &Path) -> Result<QuantileEnsemble, ForecastError> {
    read_ensemble(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(q: f64, seed: u64) -> TrainedModel {
        let config = ModelConfig { hidden_size: 3, quantile: q, seed, ..Default::default() };
        TrainedModel {
            config,
            weights: LstmWeights::init(&config),
            summary: TrainingSummary {
                epochs_run: 4,
                best_epoch: 2,
                first_train_loss: 0.5,
                final_train_loss: 0.1,
                best_val_loss: 0.2,
            },
        }
    }

    fn ensemble() -> QuantileEnsemble {
        QuantileEnsemble {
            horizon: Horizon::Min15,
            lower: member(0.05, 7),
            median: member(0.5, 8),
            upper: member(0.95, 9),
            fingerprint: "abc123".into(),
            metadata: [("seed".to_string(), "7".to_string())].into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let e = ensemble();
        let bytes = encode(&e);
        assert_eq!(decode(&bytes).unwrap(), e);
    }

    #[test]
    fn flipped_version_byte() {
        let mut bytes = encode(&ensemble());
        bytes[8] ^= 0xff;
        match decode(&bytes) {
            Err(ForecastError::Version { found, expected }) => {
                assert_eq!(expected, FORMAT_VERSION);
                assert_ne!(found, FORMAT_VERSION);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_and_bitflips_fail_checksum() {
        let bytes = encode(&ensemble());
        for cut in [1, 8, 100, bytes.len() - 20] {
            assert!(matches!(decode(&bytes[..bytes.len() - cut]), Err(ForecastError::Checksum)), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        flipped[200] ^= 1;
        assert!(matches!(decode(&flipped), Err(ForecastError::Checksum)));
        assert!(matches!(decode(b"NOTAMODELFILE..."), Err(ForecastError::BadMagic)));
    }
}
