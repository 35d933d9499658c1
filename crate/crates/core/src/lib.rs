//! Exact-diagonalization laboratory for Sachdev-Ye-Kitaev Hamiltonians on
//! Majorana fermions, with entanglement, level-statistics and
//! stabilizer-entropy diagnostics.
//!
//! Qubit `k` (1-based) is bit `k-1` of a computational basis index.

pub mod entanglement;
pub mod error;
pub mod ess;
pub mod fitting;
pub mod haar;
pub mod pauli;
pub mod runner;
pub mod spectral;
pub mod sre;
pub mod syk;

pub use error::{Error, Result};
pub use num_complex::Complex64;
