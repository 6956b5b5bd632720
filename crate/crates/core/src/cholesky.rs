//! Lower-triangular Cholesky parameterization ρ = TT†/Tr(TT†).
//!
//! The τ-vector stores the real diagonal of T first (top-left to
//! bottom-right), then (real, imaginary) pairs for each sub-diagonal in
//! order of increasing offset, each sub-diagonal read top to bottom. For a
//! 4×4 matrix:
//!
//! ```text
//! τ0
//! τ4+iτ5    τ1
//! τ10+iτ11  τ6+iτ7    τ2
//! τ14+iτ15  τ12+iτ13  τ8+iτ9  τ3
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{qubits_for_dim, ComplexMatrix, DensityMatrix};

/// Tag for the layout above, stored in file headers.
pub const TAU_LAYOUT_TAG: u32 = 1;

/// Tikhonov shift applied before factorizing a target state.
pub const REGULARIZATION: f64 = 1e-12;

const MIN_TRACE: f64 = 1e-300;

/// Where one entry of T lives in the τ-vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TauSlot {
    pub row: usize,
    pub col: usize,
    pub re: usize,
    /// `None` on the diagonal, which is real.
    pub im: Option<usize>,
}

/// Index map for a d×d lower-triangular T.
pub fn tau_layout(d: usize) -> Result<Vec<TauSlot>> {
    qubits_for_dim(d)?;
    let mut slots = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        slots.push(TauSlot { row: i, col: i, re: i, im: None });
    }
    let mut next = d;
    for offset in 1..d {
        for col in 0..d - offset {
            slots.push(TauSlot { row: col + offset, col, re: next, im: Some(next + 1) });
            next += 2;
        }
    }
    debug_assert_eq!(next, d * d);
    Ok(slots)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TauVector {
    num_qubits: usize,
    values: Vec<f64>,
}

impl TauVector {
    pub fn new(num_qubits: usize, values: Vec<f64>) -> Result<Self> {
        let expected = 4usize.pow(num_qubits as u32);
        if num_qubits == 0 || values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "tau vector for {num_qubits} qubits needs {expected} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("tau vector has non-finite values".into()));
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

    /// The lower-triangular matrix T.
    pub fn to_lower_triangular(&self) -> ComplexMatrix {
        let d = 1usize << self.num_qubits;
        let mut t = ComplexMatrix::zeros(d, d);
        for slot in tau_layout(d).expect("power-of-two dimension") {
            let im = slot.im.map_or(0.0, |k| self.values[k]);
            t[(slot.row, slot.col)] = Complex64::new(self.values[slot.re], im);
        }
        t
    }
}

/// TT†/Tr(TT†); positive semidefinite for any finite τ.
pub fn tau_to_rho(tau: &TauVector) -> Result<DensityMatrix> {
    let t = tau.to_lower_triangular();
    // Tr(TT†) is the squared norm of τ
    let tr: f64 = tau.values.iter().map(|v| v * v).sum();
    if !(tr > MIN_TRACE) {
        return Err(Error::ZeroTrace);
    }
    let mut rho = &t * t.adjoint() / Complex64::new(tr, 0.0);
    let d = rho.nrows();
    for i in 0..d {
        rho[(i, i)].im = 0.0;
        for j in i + 1..d {
            rho[(j, i)] = rho[(i, j)].conj();
        }
    }
    Ok(DensityMatrix::from_trusted(rho))
}

/// Complex Cholesky factor L with L·L† = a and a non-negative real diagonal.
fn cholesky_lower(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = a.nrows();
    let mut l = ComplexMatrix::zeros(d, d);
    for j in 0..d {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) {
            return Err(Error::Numerical(format!(
                "Cholesky pivot {j} is {diag:e} after regularization"
            )));
        }
        let ljj = diag.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in j + 1..d {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Canonical unit-norm τ for `rho`, via Cholesky of ρ + δI.
pub fn rho_to_tau(rho: &DensityMatrix) -> Result<TauVector> {
    let d = rho.dim();
    let shifted = rho.matrix() + ComplexMatrix::identity(d, d) * Complex64::new(REGULARIZATION, 0.0);
    let l = cholesky_lower(&shifted)?;
    let mut values = vec![0.0; d * d];
    for slot in tau_layout(d)? {
        let z = l[(slot.row, slot.col)];
        values[slot.re] = z.re;
        if let Some(k) = slot.im {
            values[k] = z.im;
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    values.iter_mut().for_each(|v| *v /= norm);
    TauVector::new(rho.num_qubits(), values)
}
