//! Versioned binary checkpoints.
//!
//! Layout, all little-endian: magic `QRECCKPT`, u32 version, u32 num qubits,
//! u32 filters, u32 kernel, u32 pool, u32 dense1, u32 dense2, f64 dropout,
//! f64 learning rate, u32 batch size, u32 max epochs, u64 seed, u32 epochs
//! completed, u32 best epoch, f64 best validation fidelity, u32 tensor
//! count, then per tensor u32 rank followed by that many u32 dims. Then all
//! parameter values as f64, then all Adagrad accumulators as f64.

use std::io::{Read, Write};
use std::path::Path;

use super::config::{NetworkConfig, KERNEL, POOL};
use super::network::{tensor_specs, NetworkParams};
use super::train::TrainState;
use crate::dataset::{read_f64s, read_u32, read_u64, write_f64s};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"QRECCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training bookkeeping stored alongside the parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Progress {
    pub epochs_completed: usize,
    pub best_epoch: usize,
    pub best_fidelity: f64,
}

impl Default for Progress {
    fn default() -> Self {
        Self { epochs_completed: 0, best_epoch: 0, best_fidelity: f64::NEG_INFINITY }
    }
}

impl Progress {
    pub fn of(state: &TrainState) -> Self {
        Self {
            epochs_completed: state.epochs_completed,
            best_epoch: state.best_epoch,
            best_fidelity: state.best_fidelity,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub progress: Progress,
}

impl Checkpoint {
    /// Fails with a dimension mismatch unless the network is for `m` qubits.
    pub fn expect_qubits(&self, m: usize) -> Result<()> {
        let have = self.params.config().num_qubits;
        if have != m {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint is for {have}-qubit states, task needs {m}"
            )));
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let cfg = self.params.config();
        let mut buf = Vec::new();
        buf.extend_from_slice(&CHECKPOINT_MAGIC);
        let u32s = |buf: &mut Vec<u8>, vals: &[usize]| {
            for &v in vals {
                buf.extend_from_slice(&(v as u32).to_le_bytes());
            }
        };
        u32s(&mut buf, &[CHECKPOINT_VERSION as usize, cfg.num_qubits, cfg.filters, KERNEL, POOL, cfg.dense[0], cfg.dense[1]]);
        buf.extend_from_slice(&cfg.dropout.to_le_bytes());
        buf.extend_from_slice(&cfg.learning_rate.to_le_bytes());
        u32s(&mut buf, &[cfg.batch_size, cfg.max_epochs]);
        buf.extend_from_slice(&cfg.seed.to_le_bytes());
        u32s(&mut buf, &[self.progress.epochs_completed, self.progress.best_epoch]);
        buf.extend_from_slice(&self.progress.best_fidelity.to_le_bytes());
        let specs = self.params.specs();
        u32s(&mut buf, &[specs.len()]);
        for spec in specs {
            u32s(&mut buf, &[spec.dims.len()]);
            u32s(&mut buf, &spec.dims);
        }
        w.write_all(&buf)?;
        write_f64s(&mut w, self.params.values())?;
        write_f64s(&mut w, self.params.accumulators())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Checkpoint> {
        let eof = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("truncated checkpoint".into())
            } else {
                Error::Io(e)
            }
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(eof)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = read_u32(&mut r).map_err(eof)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut u = || read_u32(&mut r).map(|v| v as usize);
        let (m, filters, kernel, pool, d1, d2) = (u().map_err(eof)?, u().map_err(eof)?, u().map_err(eof)?, u().map_err(eof)?, u().map_err(eof)?, u().map_err(eof)?);
        if kernel != KERNEL || pool != POOL {
            return Err(Error::Format(format!("unsupported kernel {kernel} / pool {pool}")));
        }
        let f64_of = |r: &mut dyn Read| -> Result<f64> { Ok(f64::from_bits(read_u64(&mut { r }).map_err(eof)?)) };
        let dropout = f64_of(&mut r)?;
        let learning_rate = f64_of(&mut r)?;
        let batch_size = read_u32(&mut r).map_err(eof)? as usize;
        let max_epochs = read_u32(&mut r).map_err(eof)? as usize;
        let seed = read_u64(&mut r).map_err(eof)?;
        let epochs_completed = read_u32(&mut r).map_err(eof)? as usize;
        let best_epoch = read_u32(&mut r).map_err(eof)? as usize;
        let best_fidelity = f64_of(&mut r)?;

        let config = NetworkConfig { num_qubits: m, filters, dense: [d1, d2], dropout, learning_rate, batch_size, max_epochs, seed };
        config.validate().map_err(|e| Error::Format(format!("invalid stored config: {e}")))?;
        let expected = tensor_specs(&config);

        let n_tensors = read_u32(&mut r).map_err(eof)? as usize;
        if n_tensors != expected.len() {
            return Err(Error::Format(format!("shape table lists {n_tensors} tensors, expected {}", expected.len())));
        }
        for spec in &expected {
            let rank = read_u32(&mut r).map_err(eof)? as usize;
            if rank > 8 {
                return Err(Error::Format(format!("corrupt shape table: rank {rank}")));
            }
            let dims = (0..rank).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<std::io::Result<Vec<_>>>().map_err(eof)?;
            if dims != spec.dims {
                return Err(Error::Format(format!(
                    "shape table entry for {} is {dims:?}, config implies {:?}",
                    spec.name, spec.dims
                )));
            }
        }
        let total: usize = expected.iter().map(|s| s.len()).sum();
        let values = read_f64s(&mut r, total).map_err(eof)?;
        let accumulators = read_f64s(&mut r, total).map_err(eof)?;
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format("trailing bytes after checkpoint data".into()));
        }
        Ok(Checkpoint {
            params: NetworkParams::from_parts(config, values, accumulators)?,
            progress: Progress { epochs_completed, best_epoch, best_fidelity },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        Checkpoint::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub fn save_checkpoint(params: &NetworkParams, progress: Progress, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint { params: params.clone(), progress }.save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::load(path)
}
