//! Seeded random matrices and random density matrices.
//!
//! `RandomSource` wraps ChaCha20 keyed by the 64-bit seed (little-endian,
//! zero-extended to 256 bits). Substreams come from [`RandomSource::fork`],
//! which depends only on the parent seed and the index, never on how many
//! values the parent has already produced. Dataset generation draws state `i`
//! from `fork(i)`, so the output is independent of evaluation order.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix};

/// Smallest trace accepted from a random draw before retrying.
const MIN_TRACE: f64 = 1e-300;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self { seed, rng: ChaCha20Rng::from_seed(key) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream `index`: seed' = splitmix64(seed ^ splitmix64(index)).
    pub fn fork(&self, index: u64) -> RandomSource {
        RandomSource::new(splitmix64(self.seed ^ splitmix64(index)))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Probability measure over density matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    HilbertSchmidt,
    Bures,
}

impl Measure {
    /// Tag stored in binary file headers.
    pub fn tag(self) -> u32 {
        match self {
            Measure::HilbertSchmidt => 0,
            Measure::Bures => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(Measure::HilbertSchmidt),
            1 => Ok(Measure::Bures),
            t => Err(Error::Format(format!("unknown measure tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::HilbertSchmidt => "hs",
            Measure::Bures => "bures",
        }
    }

    pub fn sample(self, num_qubits: usize, rng: &mut RandomSource) -> Result<DensityMatrix> {
        match self {
            Measure::HilbertSchmidt => sample_hs(num_qubits, rng),
            Measure::Bures => sample_bures(num_qubits, rng),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hs" | "hilbert-schmidt" | "hilbert_schmidt" => Ok(Measure::HilbertSchmidt),
            "bures" => Ok(Measure::Bures),
            other => Err(Error::InvalidArgument(format!("unknown measure '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateEnsembleSpec {
    pub num_qubits: usize,
    pub measure: Measure,
    pub count: usize,
}

impl StateEnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.num_qubits) {
            return Err(Error::InvalidArgument(format!(
                "num_qubits must be in 1..=4, got {}",
                self.num_qubits
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidArgument("ensemble count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Draws the ensemble; state `i` comes from `rng.fork(i)`.
pub fn sample_ensemble(spec: &StateEnsembleSpec, rng: &RandomSource) -> Result<Vec<DensityMatrix>> {
    spec.validate()?;
    (0..spec.count)
        .map(|i| spec.measure.sample(spec.num_qubits, &mut rng.fork(i as u64)))
        .collect()
}

/// d×d matrix of i.i.d. (a + ib)/√2 entries, filled row-major.
pub fn ginibre(d: usize, rng: &mut RandomSource) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        let re = rng.standard_normal();
        let im = rng.standard_normal();
        entries.push(Complex64::new(re * scale, im * scale));
    }
    DMatrix::from_row_slice(d, d, &entries)
}

/// Haar-random unitary: QR of a Ginibre draw with each column of Q rotated
/// by the phase of the matching diagonal entry of R.
pub fn haar_unitary(d: usize, rng: &mut RandomSource) -> ComplexMatrix {
    let qr = ginibre(d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn normalized_gram(a: &ComplexMatrix) -> Option<ComplexMatrix> {
    let gram = a * a.adjoint();
    let tr = gram.trace().re;
    if !(tr > MIN_TRACE) || !tr.is_finite() {
        return None;
    }
    let mut rho = gram / Complex64::new(tr, 0.0);
    // exact Hermitian symmetry
    let n = rho.nrows();
    for i in 0..n {
        rho[(i, i)].im = 0.0;
        for j in i + 1..n {
            rho[(j, i)] = rho[(i, j)].conj();
        }
    }
    Some(rho)
}

fn sample_with_retry(
    num_qubits: usize,
    rng: &mut RandomSource,
    draw: impl Fn(usize, &mut RandomSource) -> ComplexMatrix,
) -> Result<DensityMatrix> {
    if num_qubits == 0 {
        return Err(Error::InvalidArgument("num_qubits must be >= 1".into()));
    }
    let d = 1usize << num_qubits;
    for _ in 0..2 {
        if let Some(rho) = normalized_gram(&draw(d, rng)) {
            return Ok(DensityMatrix::from_trusted(rho));
        }
    }
    Err(Error::DegenerateDraw)
}

/// Hilbert–Schmidt random state GG†/Tr(GG†) with square Ginibre G.
pub fn sample_hs(num_qubits: usize, rng: &mut RandomSource) -> Result<DensityMatrix> {
    sample_with_retry(num_qubits, rng, ginibre)
}

/// Bures random state (I+U)GG†(I+U)† normalized, with Ginibre G and Haar U.
pub fn sample_bures(num_qubits: usize, rng: &mut RandomSource) -> Result<DensityMatrix> {
    sample_with_retry(num_qubits, rng, |d, rng| {
        let g = ginibre(d, rng);
        let u = haar_unitary(d, rng);
        (ComplexMatrix::identity(d, d) + u) * g
    })
}
