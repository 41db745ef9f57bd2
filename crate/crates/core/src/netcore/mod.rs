//! Frequency-domain linear network algebra.
//!
//! Two-port chains are assembled in ABCD form and converted to scattering
//! parameters at a fixed reference; multiport data stays in S form.

mod abcd;
mod network;

pub use abcd::{
    abcd_matrix_to_s, abcd_to_s, cascade, line_matrix, s_matrix_to_abcd, s_to_abcd, series_matrix,
    series_two_port, shunt_matrix, shunt_two_port, transmission_line, AbcdTwoPort,
};
pub use network::{Network, Termination};
