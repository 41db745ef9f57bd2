use thiserror::Error;

/// Errors produced by network assembly, file parsing and the nonlinear solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("frequency grids do not match")]
    GridMismatch,

    #[error("singular element at {freq_hz} Hz: {what}")]
    SingularElement { freq_hz: f64, what: String },

    #[error("degenerate network at {freq_hz} Hz: {what}")]
    Singular { freq_hz: f64, what: String },

    #[error("ill-conditioned termination at {freq_hz} Hz")]
    IllConditionedTermination { freq_hz: f64 },

    #[error("port {port} out of range for a {n_ports}-port network")]
    PortOutOfRange { port: usize, n_ports: usize },

    #[error("extrapolation requested: {freq_hz} Hz lies outside [{lo_hz}, {hi_hz}] Hz")]
    Extrapolation { freq_hz: f64, lo_hz: f64, hi_hz: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unsupported {what}")]
    Unsupported { line: usize, what: String },

    #[error("pump solver did not converge at step {step} (residual {residual:.3e} after {iterations} iterations)")]
    Divergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("junction overdriven in unit cell {cell}: per-junction phase amplitude {phase:.4} rad exceeds pi/2")]
    Overdrive { cell: usize, phase: f64 },

    #[error("sideband system singular at {freq_hz} Hz (parametric oscillation threshold exceeded)")]
    Instability { freq_hz: f64 },

    #[error("signal frequency {freq_hz} Hz collides with a pump harmonic")]
    PumpCollision { freq_hz: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
