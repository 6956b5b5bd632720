//! Complex linear algebra and quantum-information primitives.
//!
//! Qubit 0 is always the most-significant Kronecker factor: in a `k`-qubit
//! basis index, qubit `q` is bit `k - 1 - q`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Hermiticity tolerance (elementwise).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as physical.
pub const EIGEN_TOL: f64 = 1e-10;
/// Allowed deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues below this are treated as a genuinely non-PSD input.
pub const PSD_FAIL_TOL: f64 = 1e-8;

/// A Hermitian, positive-semidefinite, unit-trace matrix on `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Wraps `matrix` after checking every density-matrix invariant.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let num_qubits = qubits_for_dim(matrix.nrows())?;
        if matrix.ncols() != matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_physical(&matrix)?;
        Ok(Self { num_qubits, matrix })
    }

    /// Wraps a matrix that is physical by construction. Only the shape is checked.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        let num_qubits = qubits_for_dim(matrix.nrows()).expect("power-of-two dimension");
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { num_qubits, matrix }
    }

    /// The maximally mixed state I/2^k.
    pub fn maximally_mixed(num_qubits: usize) -> Self {
        let d = 1usize << num_qubits;
        let m = ComplexMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);
        Self { num_qubits, matrix: m }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::ZeroTrace);
        }
        let d = psi.len();
        let num_qubits = qubits_for_dim(d)?;
        let m = ComplexMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / norm);
        Ok(Self { num_qubits, matrix: m })
    }

    /// Computational basis state |index⟩⟨index|.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let d = 1usize << num_qubits;
        let mut m = ComplexMatrix::zeros(d, d);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Self { num_qubits, matrix: m }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Re-checks every invariant; useful after deserialization.
    pub fn validate(&self) -> Result<()> {
        check_physical(&self.matrix)
    }
}

/// Number of qubits `k` with `2^k = dim`.
pub fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "dimension {dim} is not a power of two >= 2"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_physical(m: &ComplexMatrix) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonPhysical("non-finite entry".into()));
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NonPhysical(format!("not Hermitian (deviation {dev:e})")));
    }
    let tr = m.trace().re;
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::NonPhysical(format!("trace {tr} differs from 1")));
    }
    let min = hermitian_eigen(m).0.into_iter().fold(f64::INFINITY, f64::min);
    if min < -EIGEN_TOL {
        return Err(Error::NonPhysical(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Largest elementwise |m - m†|.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors (as columns) of a Hermitian matrix.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = hermitize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Reassembles V·diag(values)·V†.
fn from_spectrum(values: &[f64], vectors: &ComplexMatrix) -> ComplexMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        for r in 0..n {
            scaled[(r, c)] *= v;
        }
    }
    scaled * vectors.adjoint()
}

/// Kronecker product with `a`'s indices most significant.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Tensor product of two density matrices.
pub fn tensor_states(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_trusted(tensor_product(&a.matrix, &b.matrix))
}

/// Traces out the qubits listed in `remove`; the remaining qubits keep their
/// relative order.
pub fn partial_trace(rho: &DensityMatrix, remove: &[usize]) -> Result<DensityMatrix> {
    let k = rho.num_qubits;
    let mut removed = vec![false; k];
    for &q in remove {
        if q >= k {
            return Err(Error::QubitOutOfRange { index: q, num_qubits: k });
        }
        removed[q] = true;
    }
    let kept: Vec<usize> = (0..k).filter(|&q| !removed[q]).collect();
    if kept.is_empty() {
        return Err(Error::TraceAll);
    }
    if kept.len() == k {
        return Ok(rho.clone());
    }
    let traced: Vec<usize> = (0..k).filter(|&q| removed[q]).collect();
    let bit = |q: usize| 1usize << (k - 1 - q);
    // Scatter a compact index over the given qubit positions.
    let spread = |compact: usize, qubits: &[usize]| -> usize {
        let n = qubits.len();
        qubits
            .iter()
            .enumerate()
            .filter(|(pos, _)| compact >> (n - 1 - pos) & 1 == 1)
            .map(|(_, &q)| bit(q))
            .sum()
    };
    let d_keep = 1usize << kept.len();
    let d_trace = 1usize << traced.len();
    let keep_idx: Vec<usize> = (0..d_keep).map(|i| spread(i, &kept)).collect();
    let trace_idx: Vec<usize> = (0..d_trace).map(|t| spread(t, &traced)).collect();

    let m = &rho.matrix;
    let out = ComplexMatrix::from_fn(d_keep, d_keep, |i, j| {
        trace_idx
            .iter()
            .map(|&t| m[(keep_idx[i] | t, keep_idx[j] | t)])
            .sum()
    });
    Ok(DensityMatrix { num_qubits: kept.len(), matrix: out })
}

/// Removes qubits `0..count` (the most significant factors).
pub fn trace_leading(rho: &DensityMatrix, count: usize) -> Result<DensityMatrix> {
    let remove: Vec<usize> = (0..count).collect();
    partial_trace(rho, &remove)
}

/// Principal square root of a Hermitian PSD matrix.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("sqrt_psd needs a square matrix".into()));
    }
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL {
        return Err(Error::NonPhysical(format!("not Hermitian (deviation {dev:e})")));
    }
    let (values, vectors) = hermitian_eigen(m);
    if let Some(&min) = values.first() {
        if min < -PSD_FAIL_TOL {
            return Err(Error::NotPsd(min));
        }
    }
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(from_spectrum(&roots, &vectors))
}

/// Uhlmann fidelity F = |Tr √(√ρ σ √ρ)|², clipped to [0, 1].
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity between {}x{} and {}x{} states",
            rho.dim(),
            rho.dim(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    let root = sqrt_psd(&rho.matrix)?;
    let inner = &root * &sigma.matrix * &root;
    let (values, _) = hermitian_eigen(&inner);
    let tr: f64 = values.iter().map(|&v| v.max(0.0).sqrt()).sum();
    let f = tr * tr;
    Ok(f.clamp(0.0, 1.0))
}

/// Hermitizes, clamps negative eigenvalues to zero and renormalizes.
pub fn project_physical(m: &ComplexMatrix) -> Result<DensityMatrix> {
    qubits_for_dim(m.nrows())?;
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("project_physical needs a square matrix".into()));
    }
    let (values, vectors) = hermitian_eigen(m);
    let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= f64::MIN_POSITIVE {
        return Err(Error::ZeroTrace);
    }
    let normalized: Vec<f64> = clamped.iter().map(|v| v / total).collect();
    let out = hermitize(&from_spectrum(&normalized, &vectors));
    Ok(DensityMatrix::from_trusted(out))
}
