//! Conversion-matrix analysis around a converged pump.
//!
//! Small-signal quantities are written in the analytic family
//! `dv(t) = sum_m U_m exp(j w_m t) + c.c.` with `w_m = 2 pi (f_s + 2 m f_p)`.
//! The pumped junction conductance `cos(phi_p / n_eff)` only contains even
//! pump harmonics, so sidebands one pump frequency apart never couple and
//! the family steps by `2 f_p`. Members with negative `w_m` stand for the
//! conjugate of a physical tone at `|w_m|`; `m = -1` is the idler at
//! `2 f_p - f_s`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use super::pump::PumpSolution;
use crate::blocktri::BlockTridiagonal;
use crate::device::{line_admittance, linear_s21, DeviceSpec, Ladder, Link};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::units::{angular, REDUCED_FLUX_QUANTUM};

/// Mixing products `f_s + 2 m f_p`, `m = -k_sb..=k_sb`.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandGrid {
    pub f_s: f64,
    pub f_p: f64,
    pub k_sb: usize,
    /// Signed frequencies in Hz, ordered by `m`.
    pub frequencies: Vec<f64>,
}

impl SidebandGrid {
    /// Rejects signal frequencies on a pump harmonic, where signal and idler
    /// (or other products) coincide.
    pub fn new(f_s: f64, f_p: f64, k_sb: usize) -> Result<Self> {
        if k_sb == 0 {
            return Err(Error::param("k_sb", "must be >= 1 to include the idler"));
        }
        if !(f_s > 0.0) {
            return Err(Error::param("f_s", format!("must be > 0, got {f_s}")));
        }
        let ratio = f_s / f_p;
        if (ratio - ratio.round()).abs() < 1e-9 {
            return Err(Error::PumpCollision { freq_hz: f_s });
        }
        let k = k_sb as i64;
        Ok(Self {
            f_s,
            f_p,
            k_sb,
            frequencies: (-k..=k).map(|m| f_s + 2.0 * m as f64 * f_p).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn signal_index(&self) -> usize {
        self.k_sb
    }

    pub fn idler_index(&self) -> usize {
        self.k_sb - 1
    }

    pub fn idler_frequency(&self) -> f64 {
        -self.frequencies[self.idler_index()]
    }

    /// Positive physical frequencies with a flag marking conjugated members.
    pub fn folded(&self) -> Vec<(f64, bool)> {
        self.frequencies.iter().map(|&f| (f.abs(), f < 0.0)).collect()
    }
}

/// Outgoing waves at both ports for a unit signal incident on one port.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandResponse {
    pub sidebands: SidebandGrid,
    /// 0 for the input port, 1 for the output port.
    pub input_port: usize,
    /// Outgoing wave at `[port][m]` in the analytic family (the physical
    /// wave of a conjugated member is the complex conjugate).
    pub waves: [Vec<Complex64>; 2],
}

impl SidebandResponse {
    fn other(&self) -> usize {
        1 - self.input_port
    }

    /// Signal transmission (S21 when driven from port 1).
    pub fn transmission(&self) -> Complex64 {
        self.waves[self.other()][self.sidebands.signal_index()]
    }

    pub fn reflection(&self) -> Complex64 {
        self.waves[self.input_port][self.sidebands.signal_index()]
    }

    /// Physical idler wave leaving the far port.
    pub fn idler_transmission(&self) -> Complex64 {
        self.waves[self.other()][self.sidebands.idler_index()].conj()
    }

    /// Outgoing photon flux over all sidebands and both ports, in units of
    /// the incident signal flux. Equals one for a lossless pumped network.
    pub fn photon_balance(&self) -> f64 {
        let ws = self.sidebands.f_s;
        self.sidebands
            .frequencies
            .iter()
            .enumerate()
            .map(|(i, &f)| (ws / f) * (self.waves[0][i].norm_sqr() + self.waves[1][i].norm_sqr()))
            .sum()
    }
}

/// Pumped ladder ready for repeated small-signal solves.
#[derive(Debug, Clone)]
pub struct PumpedLadder {
    ladder: Ladder,
    f_p: f64,
    k_sb: usize,
    /// Per junction, Fourier coefficients `c_h` of the pumped small-signal
    /// conductance `(I_c / n_eff) cos(phi_p / n_eff)`, `h = -4 k_sb..=4 k_sb`.
    coeffs: Vec<Vec<Complex64>>,
}

impl PumpedLadder {
    pub fn new(sol: &PumpSolution, spec: &DeviceSpec, k_sb: usize) -> Result<Self> {
        if k_sb == 0 {
            return Err(Error::param("k_sb", "must be >= 1 to include the idler"));
        }
        let ladder = Ladder::from_spec(spec)?;
        if sol.branch_phase_harmonics.len() != ladder.n_junctions() || sol.node_phasors.len() != ladder.n_nodes() {
            return Err(Error::param(
                "pump solution",
                "was solved on a different device".to_string(),
            ));
        }
        let k_max = sol.n_harmonics();
        let h_max = 4 * k_sb;
        let m = (16 * k_max.max(h_max)).next_power_of_two();
        let n_eff = spec.junction.effective_junctions();
        let g0 = spec.junction.i_c / n_eff;
        let coeffs = sol
            .branch_phase_harmonics
            .iter()
            .map(|phi_h| {
                let g: Vec<f64> = (0..m)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / m as f64;
                        let phi: f64 = phi_h
                            .iter()
                            .enumerate()
                            .map(|(k, p)| (p * Complex64::from_polar(1.0, (k + 1) as f64 * t)).re)
                            .sum();
                        g0 * (phi / n_eff).cos()
                    })
                    .collect();
                (-(h_max as i64)..=h_max as i64)
                    .map(|h| {
                        g.iter()
                            .enumerate()
                            .map(|(j, &gj)| {
                                gj * Complex64::from_polar(1.0, -2.0 * PI * (h * j as i64) as f64 / m as f64)
                            })
                            .sum::<Complex64>()
                            / m as f64
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            ladder,
            f_p: sol.drive.f_p,
            k_sb,
            coeffs,
        })
    }

    fn coeff(&self, junction: usize, h: i64) -> Complex64 {
        self.coeffs[junction][(h + 4 * self.k_sb as i64) as usize]
    }

    fn assemble(&self, sb: &SidebandGrid) -> Result<BlockTridiagonal<Complex64>> {
        let s = sb.len();
        let n = self.ladder.n_nodes();
        let jp = &self.ladder.junction;
        let cj_branch = jp.c_j / jp.n_series as f64;
        let omegas: Vec<f64> = sb.frequencies.iter().map(|&f| angular(f)).collect();
        let g_port = Complex64::new(1.0 / self.ladder.z_system, 0.0);
        let mut sys = BlockTridiagonal::<Complex64>::zeros(n, s);

        for node in 0..n {
            for (i, &w) in omegas.iter().enumerate() {
                let mut y = self.ladder.shunt_admittance(node, w);
                if node == 0 || node == n - 1 {
                    y += g_port;
                }
                if !(y.re.is_finite() && y.im.is_finite()) {
                    return Err(Error::SingularElement {
                        freq_hz: sb.frequencies[i].abs(),
                        what: format!("shunt admittance at node {node}"),
                    });
                }
                sys.diag[node][(i, i)] += y;
            }
        }
        let mut junction = 0;
        for (l, link) in self.ladder.links.iter().enumerate() {
            match *link {
                Link::Junction { .. } => {
                    let mut y = nalgebra::DMatrix::<Complex64>::zeros(s, s);
                    for (r, &wr) in omegas.iter().enumerate() {
                        for (c, &wc) in omegas.iter().enumerate() {
                            let h = 2 * (r as i64 - c as i64);
                            // dphi_c = dV_c / (j w_c Phi0_reduced)
                            y[(r, c)] = self.coeff(junction, h)
                                / Complex64::new(0.0, wc * REDUCED_FLUX_QUANTUM);
                        }
                        y[(r, r)] += Complex64::new(0.0, wr * cj_branch);
                    }
                    sys.diag[l] += &y;
                    sys.diag[l + 1] += &y;
                    sys.upper[l] -= &y;
                    sys.lower[l] -= &y;
                    junction += 1;
                }
                Link::Line { z0, theta_ref, f_ref } => {
                    for (i, &w) in omegas.iter().enumerate() {
                        let (y11, y12) = line_admittance(z0, theta_ref, f_ref, w).ok_or(
                            Error::SingularElement {
                                freq_hz: sb.frequencies[i].abs(),
                                what: format!("corner line at link {l} is a half-wave multiple"),
                            },
                        )?;
                        sys.diag[l][(i, i)] += y11;
                        sys.diag[l + 1][(i, i)] += y11;
                        sys.upper[l][(i, i)] += y12;
                        sys.lower[l][(i, i)] += y12;
                    }
                }
            }
        }
        Ok(sys)
    }

    /// Solves the sideband system for a unit signal incident on `input_port`
    /// (0 = device input, 1 = device output).
    pub fn response(&self, f_s: f64, input_port: usize) -> Result<SidebandResponse> {
        assert!(input_port < 2, "two-port device");
        let sb = SidebandGrid::new(f_s, self.f_p, self.k_sb)?;
        let sys = self.assemble(&sb)?;
        let n = self.ladder.n_nodes();
        let drive_node = if input_port == 0 { 0 } else { n - 1 };
        let mut rhs = vec![DVector::<Complex64>::zeros(sb.len()); n];
        // Unit Thevenin source behind z_system: incident wave 1/2 in voltage units.
        rhs[drive_node][sb.signal_index()] = Complex64::new(1.0 / self.ladder.z_system, 0.0);
        let v = sys.solve(&rhs).ok_or(Error::Instability { freq_hz: f_s })?;
        let wave = |node: usize, i: usize, driven: bool| {
            let b = 2.0 * v[node][i];
            if driven && i == sb.signal_index() {
                b - 1.0
            } else {
                b
            }
        };
        let waves = [
            (0..sb.len()).map(|i| wave(0, i, input_port == 0)).collect(),
            (0..sb.len()).map(|i| wave(n - 1, i, input_port == 1)).collect(),
        ];
        Ok(SidebandResponse {
            sidebands: sb,
            input_port,
            waves,
        })
    }
}

/// How `gain_db` is referenced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Pumped transmission against the pump-off device.
    RelativeToLinear,
    /// Pumped transmission against an ideal through.
    Absolute,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::RelativeToLinear => "relative-to-linear",
            Normalization::Absolute => "absolute",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "relative-to-linear" => Ok(Normalization::RelativeToLinear),
            "absolute" => Ok(Normalization::Absolute),
            other => Err(format!("unknown normalization `{other}` (absolute | relative-to-linear)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainOptions {
    pub k_sb: usize,
    pub normalization: Normalization,
}

impl Default for GainOptions {
    fn default() -> Self {
        Self {
            k_sb: 1,
            normalization: Normalization::Absolute,
        }
    }
}

/// Small-signal response of the pumped device over signal frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSpectrum {
    /// Signal frequencies actually solved (pump-harmonic collisions removed).
    pub grid: FrequencyGrid,
    pub s21_pumped: Vec<Complex64>,
    pub s11_pumped: Vec<Complex64>,
    pub gain_db: Vec<f64>,
    /// Signal in -> idler out at `2 f_p - f_s`.
    pub s_idler: Vec<Complex64>,
    pub normalization: Normalization,
    /// Requested frequencies skipped because they hit a pump harmonic.
    pub skipped: Vec<f64>,
}

impl GainSpectrum {
    pub fn idler_db(&self) -> Vec<f64> {
        self.s_idler.iter().map(|s| 20.0 * s.norm().log10()).collect()
    }
}

/// Signal gain and idler conversion of the pumped device on `grid`.
pub fn conversion_gain(
    sol: &PumpSolution,
    spec: &DeviceSpec,
    grid: &FrequencyGrid,
    opts: &GainOptions,
) -> Result<GainSpectrum> {
    let pumped = PumpedLadder::new(sol, spec, opts.k_sb)?;
    let mut kept = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    let mut s21 = Vec::with_capacity(grid.len());
    let mut s11 = Vec::with_capacity(grid.len());
    let mut idler = Vec::with_capacity(grid.len());
    let responses: Vec<(f64, Result<SidebandResponse>)> = grid
        .points()
        .par_iter()
        .map(|&f| (f, pumped.response(f, 0)))
        .collect();
    for (f, outcome) in responses {
        match outcome {
            Ok(r) => {
                kept.push(f);
                s21.push(r.transmission());
                s11.push(r.reflection());
                idler.push(r.idler_transmission());
            }
            Err(Error::PumpCollision { .. }) => {
                log::warn!("signal frequency {f} Hz collides with a pump harmonic; skipped");
                skipped.push(f);
            }
            Err(e) => return Err(e),
        }
    }
    let kept_grid = FrequencyGrid::new(kept).map_err(|_| Error::PumpCollision {
        freq_hz: grid.first(),
    })?;
    let mut gain_db: Vec<f64> = s21.iter().map(|s| 20.0 * s.norm().log10()).collect();
    if opts.normalization == Normalization::RelativeToLinear {
        let lin = linear_s21(spec, &kept_grid, &Default::default())?;
        for (g, l) in gain_db.iter_mut().zip(&lin.s21_db) {
            *g -= l;
        }
    }
    Ok(GainSpectrum {
        grid: kept_grid,
        s21_pumped: s21,
        s11_pumped: s11,
        gain_db,
        s_idler: idler,
        normalization: opts.normalization,
        skipped,
    })
}
