//! Low-lying spectra of the lattice Schwinger model via the concurrent
//! variational quantum eigensolver, with exact-diagonalization oracles,
//! mass-shift extraction from the energy gap and zero-noise-extrapolated
//! inference runs.

pub mod ansatz;
pub mod cvqe;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod pauli;
pub mod reference;
pub mod renorm;
pub mod simulator;
pub mod zne;

pub use error::{Error, Result};
