//! Binary dataset container shared by generation, training and reconstruction.
//!
//! Layout, all little-endian:
//!
//! | field            | type     |
//! |------------------|----------|
//! | magic `QRECDATA` | 8 bytes  |
//! | format version   | u32      |
//! | num qubits m     | u32      |
//! | measure tag      | u32      |
//! | setting order    | u32      |
//! | τ layout         | u32      |
//! | flags            | u32      |
//! | seed             | u64      |
//! | record count     | u64      |
//!
//! followed by `count` records of 6^m measurement f64s and, when flag bit 0
//! is set, 4^m τ-target f64s.

use std::io::{Read, Write};
use std::path::Path;

use crate::cholesky::{rho_to_tau, tau_to_rho, TauVector, TAU_LAYOUT_TAG};
use crate::error::{Error, Result};
use crate::qcore::DensityMatrix;
use crate::sampling::{Measure, RandomSource, StateEnsembleSpec};
use crate::tomography::{measure, num_outcomes, MeasurementVector, SETTING_ORDER_TAG};

pub const DATASET_MAGIC: [u8; 8] = *b"QRECDATA";
pub const DATASET_VERSION: u32 = 1;
const FLAG_TARGETS: u32 = 1;
const HEADER_LEN: usize = 8 + 6 * 4 + 2 * 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub num_qubits: usize,
    pub measure: Measure,
    pub seed: u64,
    pub count: usize,
    pub has_targets: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub measurement: MeasurementVector,
    pub target: Option<TauVector>,
}

impl Record {
    /// Ground-truth state recovered from the τ target, if present.
    pub fn target_state(&self) -> Option<Result<DensityMatrix>> {
        self.target.as_ref().map(tau_to_rho)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub num_qubits: usize,
    pub measure: Measure,
    pub seed: u64,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_targets(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.target.is_some())
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            num_qubits: self.num_qubits,
            measure: self.measure,
            seed: self.seed,
            count: self.records.len(),
            has_targets: self.has_targets(),
        }
    }

    /// Splits off the last `tail` records.
    pub fn split_tail(mut self, tail: usize) -> Result<(Dataset, Dataset)> {
        if tail >= self.records.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot hold out {tail} of {} records",
                self.records.len()
            )));
        }
        let rest = self.records.split_off(self.records.len() - tail);
        let held = Dataset { records: rest, ..self.clone() };
        Ok((self, held))
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = self.header();
        if self.records.iter().any(|r| r.target.is_some() != header.has_targets) {
            return Err(Error::InvalidArgument("targets must be present on all records or none".into()));
        }
        let mut buf = Vec::with_capacity(HEADER_LEN);
        buf.extend_from_slice(&DATASET_MAGIC);
        for v in [
            DATASET_VERSION,
            self.num_qubits as u32,
            self.measure.tag(),
            SETTING_ORDER_TAG,
            TAU_LAYOUT_TAG,
            if header.has_targets { FLAG_TARGETS } else { 0 },
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        w.write_all(&buf)?;
        for r in &self.records {
            if r.measurement.num_qubits() != self.num_qubits {
                return Err(Error::DimensionMismatch("record qubit count differs from header".into()));
            }
            write_f64s(&mut w, r.measurement.values())?;
            if let Some(t) = &r.target {
                write_f64s(&mut w, t.values())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Dataset> {
        let header = read_header(&mut r)?;
        let m = header.num_qubits;
        let mut records = Vec::with_capacity(header.count.min(1 << 20));
        for i in 0..header.count {
            let values = read_f64s(&mut r, num_outcomes(m))
                .map_err(|e| truncated(e, &format!("record {i} of {}", header.count)))?;
            let measurement = MeasurementVector::new(m, values)?;
            let target = if header.has_targets {
                let t = read_f64s(&mut r, 4usize.pow(m as u32))
                    .map_err(|e| truncated(e, &format!("target {i} of {}", header.count)))?;
                Some(TauVector::new(m, t)?)
            } else {
                None
            };
            records.push(Record { measurement, target });
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format("trailing bytes after last record".into()));
        }
        Ok(Dataset { num_qubits: m, measure: header.measure, seed: header.seed, records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        Dataset::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn truncated(e: std::io::Error, what: &str) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format(format!("truncated file while reading {what}"))
    } else {
        Error::Io(e)
    }
}

pub(crate) fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64s(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub(crate) fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_header(r: &mut impl Read) -> Result<DatasetHeader> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| truncated(e, "header"))?;
    if magic != DATASET_MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let fields: Vec<u32> = (0..6)
        .map(|_| read_u32(r))
        .collect::<std::io::Result<_>>()
        .map_err(|e| truncated(e, "header"))?;
    let [version, m, measure_tag, order, layout, flags] = fields[..] else { unreachable!() };
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    if !(1..=4).contains(&m) {
        return Err(Error::Format(format!("unsupported qubit count {m}")));
    }
    if order != SETTING_ORDER_TAG {
        return Err(Error::Format(format!("unknown setting-order tag {order}")));
    }
    if layout != TAU_LAYOUT_TAG {
        return Err(Error::Format(format!("unknown tau-layout tag {layout}")));
    }
    let seed = read_u64(r).map_err(|e| truncated(e, "header"))?;
    let count = read_u64(r).map_err(|e| truncated(e, "header"))? as usize;
    Ok(DatasetHeader {
        num_qubits: m as usize,
        measure: Measure::from_tag(measure_tag)?,
        seed,
        count,
        has_targets: flags & FLAG_TARGETS != 0,
    })
}

/// Measurement vector plus τ target for one state.
pub fn record_for(rho: &DensityMatrix) -> Result<Record> {
    Ok(Record { measurement: measure(rho), target: Some(rho_to_tau(rho)?) })
}

/// Samples `spec.count` states (state `i` from `RandomSource::new(seed).fork(i)`)
/// and records their exact measurement vectors and τ targets.
pub fn generate(spec: &StateEnsembleSpec, seed: u64) -> Result<Dataset> {
    let states = crate::sampling::sample_ensemble(spec, &RandomSource::new(seed))?;
    let records = states.iter().map(record_for).collect::<Result<Vec<_>>>()?;
    Ok(Dataset { num_qubits: spec.num_qubits, measure: spec.measure, seed, records })
}
