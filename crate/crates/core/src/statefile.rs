//! Binary file of reconstructed density matrices.
//!
//! Layout, little-endian: magic `QRECRHO\0`, u32 version, u32 num qubits,
//! u64 state count, then per state the 2^n × 2^n entries in row-major
//! order, each as f64 real part followed by f64 imaginary part.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::dataset::{read_f64s, read_u32, read_u64, write_f64s};
use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix};

pub const STATE_MAGIC: [u8; 8] = *b"QRECRHO\0";
pub const STATE_VERSION: u32 = 1;

fn eof(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated state file".into())
    } else {
        Error::Io(e)
    }
}

/// All states must have the same qubit count.
pub fn write_states(states: &[DensityMatrix], mut w: impl Write) -> Result<()> {
    let n = states.first().map_or(0, DensityMatrix::num_qubits);
    if states.iter().any(|s| s.num_qubits() != n) {
        return Err(Error::DimensionMismatch("states in one file must share a qubit count".into()));
    }
    w.write_all(&STATE_MAGIC)?;
    w.write_all(&STATE_VERSION.to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&(states.len() as u64).to_le_bytes())?;
    for s in states {
        let d = s.dim();
        let flat: Vec<f64> = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .flat_map(|(i, j)| {
                let z = s.matrix()[(i, j)];
                [z.re, z.im]
            })
            .collect();
        write_f64s(&mut w, &flat)?;
    }
    Ok(())
}

/// Reads and validates every state; unphysical entries are format errors.
pub fn read_states(mut r: impl Read) -> Result<Vec<DensityMatrix>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(eof)?;
    if magic != STATE_MAGIC {
        return Err(Error::Format("not a state file (bad magic)".into()));
    }
    let version = read_u32(&mut r).map_err(eof)?;
    if version != STATE_VERSION {
        return Err(Error::Format(format!("unsupported state file version {version}")));
    }
    let n = read_u32(&mut r).map_err(eof)? as usize;
    if n > 16 {
        return Err(Error::Format(format!("implausible qubit count {n}")));
    }
    let count = read_u64(&mut r).map_err(eof)?;
    let d = 1usize << n;
    let mut states = Vec::new();
    for k in 0..count {
        let raw = read_f64s(&mut r, 2 * d * d).map_err(eof)?;
        let m = ComplexMatrix::from_fn(d, d, |i, j| {
            let at = 2 * (i * d + j);
            Complex64::new(raw[at], raw[at + 1])
        });
        let rho = DensityMatrix::new(m).map_err(|e| Error::Format(format!("state {k}: {e}")))?;
        states.push(rho);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after state data".into()));
    }
    Ok(states)
}

pub fn save_states(states: &[DensityMatrix], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_states(states, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_states(path: impl AsRef<Path>) -> Result<Vec<DensityMatrix>> {
    read_states(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_hs, RandomSource};

    #[test]
    fn roundtrip_is_exact() {
        let mut rng = RandomSource::new(1);
        let states: Vec<_> = (0..3).map(|_| sample_hs(2, &mut rng).unwrap()).collect();
        let mut raw = Vec::new();
        write_states(&states, &mut raw).unwrap();
        assert_eq!(raw.len(), 24 + 3 * 16 * 16);
        assert_eq!(read_states(raw.as_slice()).unwrap(), states);
    }

    #[test]
    fn entries_are_row_major_re_im() {
        let rho = sample_hs(1, &mut RandomSource::new(2)).unwrap();
        let mut raw = Vec::new();
        write_states(std::slice::from_ref(&rho), &mut raw).unwrap();
        let at = |k: usize| f64::from_le_bytes(raw[24 + 8 * k..32 + 8 * k].try_into().unwrap());
        assert_eq!(at(2), rho.matrix()[(0, 1)].re);
        assert_eq!(at(3), rho.matrix()[(0, 1)].im);
        assert_eq!(at(4), rho.matrix()[(1, 0)].re);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let rho = sample_hs(1, &mut RandomSource::new(2)).unwrap();
        let mut raw = Vec::new();
        write_states(&[rho], &mut raw).unwrap();
        assert!(matches!(read_states(&raw[..raw.len() - 3]), Err(Error::Format(_))));
        let mut bad = raw.clone();
        bad[0] = b'X';
        assert!(matches!(read_states(bad.as_slice()), Err(Error::Format(_))));
        let mut bad = raw.clone();
        bad[24..32].copy_from_slice(&5.0f64.to_le_bytes());
        assert!(matches!(read_states(bad.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn mixed_sizes_are_rejected() {
        let mut rng = RandomSource::new(3);
        let states = [sample_hs(1, &mut rng).unwrap(), sample_hs(2, &mut rng).unwrap()];
        assert!(write_states(&states, &mut Vec::new()).is_err());
    }
}
