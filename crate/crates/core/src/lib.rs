//! Co-simulation engine for Josephson traveling-wave parametric amplifiers.
//!
//! The linear stage ([`device`], built on [`netcore`]) assembles the
//! amplifier ladder from unit cells, phase-matching-resonator supercells
//! and corner cells, optionally substituting externally solved blocks read
//! through [`touchstone`]. The nonlinear stage ([`hbsolver`]) solves the
//! pump by harmonic balance and then linearizes the junctions around the
//! pump waveform to obtain small-signal gain and idler conversion.

pub mod blocktri;
pub mod device;
pub mod error;
pub mod grid;
pub mod hbsolver;
pub mod netcore;
pub mod touchstone;
pub mod units;

pub use error::{Error, Result};
pub use grid::FrequencyGrid;
