//! Physical constants and unit helpers.

/// Magnetic flux quantum h / 2e in Wb.
pub const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

/// Reduced flux quantum Phi0 / 2pi in Wb.
pub const REDUCED_FLUX_QUANTUM: f64 = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);

pub fn db20(x: f64) -> f64 {
    20.0 * x.log10()
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

pub fn angular(f_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_hz
}
