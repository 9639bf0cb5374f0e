//! Finite-temperature work statistics and irreversible entropy production
//! for sudden potential quenches of inhomogeneous Hubbard chains.
//!
//! Two routes are provided and cross-checked against each other:
//!
//! * [`exact`] diagonalizes the fixed-number sector and builds the Gibbs
//!   state directly; [`quench`] turns two such spectra into the
//!   two-point-measurement work distribution and its moments.
//! * [`ks`] solves the finite-temperature Kohn-Sham problem in the
//!   canonical ensemble with a single-site Hartree-exchange-correlation
//!   potential, using the partition-function machinery of [`canonical`].
//!
//! [`bench`] drives parameter sweeps and writes deterministic CSV files.

pub mod bench;
pub mod canonical;
pub mod error;
pub mod exact;
pub mod ks;
pub mod lattice;
pub mod quench;

pub use error::{Error, Result};
pub use exact::{DensityProfile, EigenSystem, ExactChain, SpectralData, ThermalEquilibrium};
pub use lattice::{Boundary, ChainSpec, FockBasis, PotentialShape};

/// Library version recorded in every output directory.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
