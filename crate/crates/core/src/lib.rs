//! Low-frequency frequency discrimination in nonlinear conductive networks.
//!
//! The crate synthesizes slow drive signals, simulates a network whose edges
//! combine a fast ohmic channel with a slowly activating one, and runs the
//! analysis chain on the result (or on logger recordings): Blackman-windowed
//! amplitude spectra, harmonic amplitudes, THD, the normalized 2nd/3rd
//! harmonic ratio, fuzzy classification of THD, and two-tone intermodulation
//! matching.
//!
//! Module map:
//!
//! * [`signal`]: waveforms, background noise, superposition
//! * [`netsim`]: edge laws and the transient nodal solver
//! * [`spectral`]: windows, spectra, harmonics, THD, peaks
//! * [`fuzzy`]: membership functions and THD partitions
//! * [`mixing`]: intermodulation prediction and matching
//! * [`pipeline`]: configuration, CSV ingestion, sweeps and reports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fuzzy;
pub mod mixing;
pub mod netsim;
pub mod pipeline;
pub mod signal;
pub mod spectral;

pub use error::{Error, Result};
pub use signal::TimeSeries;
