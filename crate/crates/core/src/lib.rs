//! Spin-cluster dynamics for dipole-coupled muon–nuclear systems under an
//! RF drive, plus the asymmetry model and fitting tools built on it.

pub mod analytic;
pub mod asymmetry;
pub mod cli;
pub mod de;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod hamiltonian;
pub mod io;
pub mod linalg;
pub mod model;
pub mod spin;
pub mod units;

pub use error::{Error, ErrorKind, Result};
