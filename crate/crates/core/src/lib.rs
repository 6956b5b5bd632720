//! Neural quantum state reconstruction that adapts to the number of qubits.
//!
//! A network trained on `m`-qubit Pauli-6 tomography data reconstructs
//! `n <= m` qubit states by padding the measurement vector and tracing out
//! the synthetic qubits afterwards.

pub mod error;
pub mod qcore;
pub mod sampling;
pub mod tomography;
pub mod cholesky;
pub mod dataset;
pub mod neuralnet;
pub mod adapt;
pub mod analytics;
pub mod statefile;
mod parallel;

pub use error::{Error, Result};
