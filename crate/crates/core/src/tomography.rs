//! Pauli-6 projective measurements and their joint-index ordering.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{ComplexMatrix, DensityMatrix};

/// Tag for the setting order [X+, X−, Y+, Y−, Z+, Z−], stored in file headers.
pub const SETTING_ORDER_TAG: u32 = 1;

/// Tolerance for per-axis normalization of a measurement vector.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// One of the six single-qubit Pauli eigenprojectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PauliSetting {
    XPlus = 0,
    XMinus = 1,
    YPlus = 2,
    YMinus = 3,
    ZPlus = 4,
    ZMinus = 5,
}

impl PauliSetting {
    pub const ALL: [PauliSetting; 6] = [
        PauliSetting::XPlus,
        PauliSetting::XMinus,
        PauliSetting::YPlus,
        PauliSetting::YMinus,
        PauliSetting::ZPlus,
        PauliSetting::ZMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("Pauli setting index {index} not in 0..6")))
    }

    /// Normalized eigenvector spanning the projector.
    pub fn eigenvector(self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re = |x: f64| Complex64::new(x, 0.0);
        match self {
            PauliSetting::XPlus => [re(s), re(s)],
            PauliSetting::XMinus => [re(s), re(-s)],
            PauliSetting::YPlus => [re(s), Complex64::new(0.0, s)],
            PauliSetting::YMinus => [re(s), Complex64::new(0.0, -s)],
            PauliSetting::ZPlus => [re(1.0), re(0.0)],
            PauliSetting::ZMinus => [re(0.0), re(1.0)],
        }
    }

    pub fn projector(self) -> ComplexMatrix {
        let v = self.eigenvector();
        ComplexMatrix::from_fn(2, 2, |i, j| v[i] * v[j].conj())
    }
}

/// The six projectors in the fixed order.
pub fn pauli6_projectors() -> [ComplexMatrix; 6] {
    PauliSetting::ALL.map(PauliSetting::projector)
}

/// Σ_k s_k · 6^{m−1−k}; qubit 0 has the highest place value.
pub fn joint_index(settings: &[PauliSetting]) -> usize {
    settings.iter().fold(0, |acc, s| acc * 6 + s.index())
}

/// Inverse of [`joint_index`] for `num_qubits` qubits.
pub fn settings_of(index: usize, num_qubits: usize) -> Vec<PauliSetting> {
    let mut out = vec![PauliSetting::XPlus; num_qubits];
    let mut rest = index;
    for slot in out.iter_mut().rev() {
        *slot = PauliSetting::ALL[rest % 6];
        rest /= 6;
    }
    out
}

pub fn num_outcomes(num_qubits: usize) -> usize {
    6usize.pow(num_qubits as u32)
}

/// Born-rule probabilities for all 6^m joint Pauli projectors.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementVector {
    num_qubits: usize,
    values: Vec<f64>,
}

impl MeasurementVector {
    /// Checks the length and finiteness only, so padded vectors that are not
    /// per-axis normalized can still be represented.
    pub fn new(num_qubits: usize, values: Vec<f64>) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument("num_qubits must be >= 1".into()));
        }
        let expected = num_outcomes(num_qubits);
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "measurement vector for {num_qubits} qubits needs {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("measurement vector has non-finite values".into()));
        }
        Ok(Self { num_qubits, values })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Largest deviation from one over all joint axis choices of the summed
    /// 2^m outcome probabilities.
    pub fn normalization_error(&self) -> f64 {
        let m = self.num_qubits;
        let axes = 3usize.pow(m as u32);
        let mut worst = 0.0f64;
        for axis in 0..axes {
            // decompose axis index into per-qubit axis choices, qubit 0 most significant
            let mut choice = vec![0usize; m];
            let mut rest = axis;
            for c in choice.iter_mut().rev() {
                *c = rest % 3;
                rest /= 3;
            }
            let mut total = 0.0;
            for outcome in 0..(1usize << m) {
                let idx = (0..m).fold(0, |acc, q| {
                    let sign = (outcome >> (m - 1 - q)) & 1;
                    acc * 6 + 2 * choice[q] + sign
                });
                total += self.values[idx];
            }
            worst = worst.max((total - 1.0).abs());
        }
        worst
    }

    pub fn is_normalized(&self) -> bool {
        self.values.iter().all(|&v| (-NORMALIZATION_TOL..=1.0 + NORMALIZATION_TOL).contains(&v))
            && self.normalization_error() <= NORMALIZATION_TOL
    }
}

/// Product eigenvector ⊗_k v_{s_k} for the joint setting at `index`.
fn joint_vector(index: usize, num_qubits: usize) -> Vec<Complex64> {
    let mut psi = vec![Complex64::new(1.0, 0.0)];
    for s in settings_of(index, num_qubits) {
        let v = s.eigenvector();
        psi = psi.iter().flat_map(|&a| [a * v[0], a * v[1]]).collect();
    }
    psi
}

/// Exact (infinite-shot) measurement vector of `rho`.
pub fn measure(rho: &DensityMatrix) -> MeasurementVector {
    let m = rho.num_qubits();
    let d = rho.dim();
    let mat = rho.matrix();
    let values = (0..num_outcomes(m))
        .map(|idx| {
            let psi = joint_vector(idx, m);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d {
                if psi[i] == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let mut row = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    row += mat[(i, j)] * psi[j];
                }
                acc += psi[i].conj() * row;
            }
            acc.re.clamp(0.0, 1.0)
        })
        .collect();
    MeasurementVector { num_qubits: m, values }
}

/// Like [`measure`] but first re-checks physicality of `rho`.
pub fn measure_checked(rho: &DensityMatrix) -> Result<MeasurementVector> {
    rho.validate()?;
    Ok(measure(rho))
}
