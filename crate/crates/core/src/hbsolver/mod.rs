//! Nonlinear stage: large-signal harmonic balance of the pump, followed by
//! a conversion-matrix (small-signal sideband) analysis around the pumped
//! junctions.
//!
//! Junction branches carry `i = I_c sin(phi / n_eff) + (c_j / n_series) dv/dt`
//! where `phi` is the branch phase and `n_eff = n_series * l_scale`. The pump
//! is injected at the input port through the system impedance; both ports
//! are terminated in the system impedance.

mod analysis;
mod pump;
mod sideband;
mod sweep;

pub use analysis::{band_average_gain, band_frequencies, image_dip_frequency, GainBand};
pub use pump::{solve_pump, solve_pump_warm, HarmonicBalance, PumpSolution};
pub use sideband::{
    conversion_gain, GainOptions, GainSpectrum, Normalization, PumpedLadder, SidebandGrid,
    SidebandResponse,
};
pub use sweep::{sweep, SweepPoint};

use crate::error::{Error, Result};

/// Pump tone at the device input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpDrive {
    /// Pump frequency in Hz.
    pub f_p: f64,
    /// Available power in dBm.
    pub p_dbm: f64,
    /// Pump harmonics retained, `k = 1..=n_harmonics`.
    pub n_harmonics: usize,
}

impl Default for PumpDrive {
    fn default() -> Self {
        Self {
            f_p: 7.5e9,
            p_dbm: -70.2,
            n_harmonics: 3,
        }
    }
}

impl PumpDrive {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_p > 0.0 && self.f_p.is_finite()) {
            return Err(Error::param("f_p", format!("must be > 0, got {}", self.f_p)));
        }
        if !self.p_dbm.is_finite() {
            return Err(Error::param("p_dbm", "must be finite"));
        }
        if self.n_harmonics == 0 {
            return Err(Error::param("n_harmonics", "must be >= 1"));
        }
        Ok(())
    }
}

/// Newton / continuation controls for [`solve_pump`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Max KCL residual relative to the source current `V_s / z_system`.
    pub tol: f64,
    /// Newton iterations allowed per continuation step.
    pub max_iter: usize,
    /// Geometric continuation steps (amplitude halves per step backwards).
    pub n_steps: usize,
    /// Step halvings tried when a Newton step increases the residual.
    pub max_halvings: usize,
    /// Time samples per period per retained harmonic (rounded up to a power of two).
    pub oversampling: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            n_steps: 5,
            max_halvings: 8,
            oversampling: 16,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be >= 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be >= 1"));
        }
        if self.oversampling < 4 {
            return Err(Error::param("oversampling", "must be >= 4"));
        }
        Ok(())
    }
}

/// Peak open-circuit voltage of a Thevenin source with internal impedance
/// `z0` delivering `p_dbm` of available power: `sqrt(8 z0 P)`.
pub fn dbm_to_source_amplitude(p_dbm: f64, z0: f64) -> Result<f64> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::param("z0", format!("must be > 0, got {z0}")));
    }
    Ok((8.0 * z0 * crate::units::dbm_to_watts(p_dbm)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_amplitude() {
        assert!((dbm_to_source_amplitude(0.0, 50.0).unwrap() - 0.632_455_5).abs() < 1e-6);
        assert!((crate::units::dbm_to_watts(-70.2) - 9.55e-11).abs() < 0.01e-11);
        assert!((crate::units::dbm_to_watts(-71.8) - 6.61e-11).abs() < 0.01e-11);
        assert!(dbm_to_source_amplitude(0.0, 0.0).is_err());
    }
}
