//! Angular-momentum coherent states on the sphere, their spectral evolution
//! under rigid-rotor and tabulated rotational spectra, fractional-revival
//! analysis and quantum-carpet density grids.
//!
//! Internally everything is in natural units with `ħ = 1`; energies carry
//! whatever unit the spectrum was given in and times are in `ħ / energy`.

pub mod carpet;
pub mod ce_ingest;
pub mod cli;
pub mod coherent_state;
pub mod error;
pub mod evolution;
pub mod format;
pub mod observables;
pub mod revival;
pub mod sphere_basis;

pub use error::{Error, Result};
