//! Amplifier topology: unit cells, phase-matching-resonator supercells and
//! corner cells, assembled into the pump-off (linear) two-port response and
//! into the nodal ladder used by the nonlinear stage.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::netcore::{
    abcd_to_s, line_matrix, s_to_abcd, series_matrix, shunt_matrix, AbcdTwoPort, Network,
};
use crate::units::{angular, REDUCED_FLUX_QUANTUM};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Series junction branch: `n_series` identical junctions, each a
/// nonlinear inductor shunted by its capacitance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionParams {
    /// Critical current in A.
    pub i_c: f64,
    /// Capacitance of a single junction in F.
    pub c_j: f64,
    pub n_series: usize,
    /// Series-inductance surcharge (kinetic inductance), >= 1.
    pub l_scale: f64,
}

impl Default for JunctionParams {
    fn default() -> Self {
        Self {
            i_c: 5.36e-6,
            c_j: 201.8e-15,
            n_series: 3,
            l_scale: 1.0,
        }
    }
}

impl JunctionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_c > 0.0 && self.i_c.is_finite()) {
            return Err(Error::param("i_c", format!("must be > 0, got {}", self.i_c)));
        }
        if !(self.c_j >= 0.0 && self.c_j.is_finite()) {
            return Err(Error::param("c_j", format!("must be >= 0, got {}", self.c_j)));
        }
        if self.n_series == 0 {
            return Err(Error::param("n_series", "must be >= 1"));
        }
        if !(self.l_scale >= 1.0 && self.l_scale.is_finite()) {
            return Err(Error::param("l_scale", format!("must be >= 1, got {}", self.l_scale)));
        }
        Ok(())
    }

    /// Inductance of one junction after the kinetic-inductance surcharge.
    pub fn effective_junction_inductance(&self) -> Result<f64> {
        Ok(self.l_scale * junction_linear_inductance(self)?)
    }

    /// Small-signal inductance of the whole branch, `n_series * l_scale * L_J`.
    pub fn branch_inductance(&self) -> Result<f64> {
        Ok(self.n_series as f64 * self.effective_junction_inductance()?)
    }

    /// Number of bare junctions the branch phase is spread over once the
    /// kinetic surcharge is folded in (`n_series * l_scale`).
    pub fn effective_junctions(&self) -> f64 {
        self.n_series as f64 * self.l_scale
    }

    /// Self-resonance of one junction with its capacitance; infinite when
    /// `c_j = 0`.
    pub fn plasma_frequency(&self) -> Result<f64> {
        let l = self.effective_junction_inductance()?;
        Ok(1.0 / (2.0 * PI * (l * self.c_j).sqrt()))
    }
}

/// `Phi0 / (2 pi I_c)`, the zero-bias inductance of a single junction.
pub fn junction_linear_inductance(j: &JunctionParams) -> Result<f64> {
    if !(j.i_c > 0.0 && j.i_c.is_finite()) {
        return Err(Error::param("i_c", format!("must be > 0, got {}", j.i_c)));
    }
    Ok(REDUCED_FLUX_QUANTUM / j.i_c)
}

/// Impedance of the series junction branch at `f`.
pub fn unit_cell_branch_impedance(j: &JunctionParams, f: f64) -> Result<Complex64> {
    j.validate()?;
    if !(f > 0.0) {
        return Err(Error::param("f", format!("must be > 0, got {f}")));
    }
    let w = angular(f);
    let l = j.effective_junction_inductance()?;
    let den = 1.0 - w * w * l * j.c_j;
    if den == 0.0 {
        return Err(Error::SingularElement {
            freq_hz: f,
            what: "junction plasma resonance".into(),
        });
    }
    let z = J * (j.n_series as f64 * w * l / den);
    if !(z.im.is_finite()) {
        return Err(Error::SingularElement {
            freq_hz: f,
            what: "junction plasma resonance".into(),
        });
    }
    Ok(z)
}

/// Phase-matching resonator: series R-L-C branch to ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorParams {
    pub f_r: f64,
    pub c_r: f64,
    pub r_loss: f64,
}

impl Default for ResonatorParams {
    fn default() -> Self {
        Self {
            f_r: 7.62e9,
            c_r: DEFAULT_RESONATOR_CAPACITANCE,
            r_loss: DEFAULT_RESONATOR_LOSS,
        }
    }
}

/// Default resonator capacitance (coupling strength) in F.
pub const DEFAULT_RESONATOR_CAPACITANCE: f64 = 0.3e-15;
/// Default resonator series loss in ohm.
pub const DEFAULT_RESONATOR_LOSS: f64 = 5.0;

impl ResonatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_r > 0.0 && self.f_r.is_finite()) {
            return Err(Error::param("f_r", format!("must be > 0, got {}", self.f_r)));
        }
        if !(self.c_r > 0.0 && self.c_r.is_finite()) {
            return Err(Error::param("c_r", format!("must be > 0, got {}", self.c_r)));
        }
        if !(self.r_loss >= 0.0 && self.r_loss.is_finite()) {
            return Err(Error::param("r_loss", format!("must be >= 0, got {}", self.r_loss)));
        }
        Ok(())
    }

    pub fn l_r(&self) -> f64 {
        let w = angular(self.f_r);
        1.0 / (w * w * self.c_r)
    }

    /// Branch admittance at signed angular frequency `w`; not finite at
    /// resonance when lossless.
    pub fn admittance_at(&self, w: f64) -> Complex64 {
        let z = Complex64::new(self.r_loss, w * self.l_r() - 1.0 / (w * self.c_r));
        if z.norm() == 0.0 {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        z.inv()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupercellKind {
    Standard,
    Corner,
}

/// Full parametric description of the amplifier.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub junction: JunctionParams,
    /// Shunt capacitance per unit cell in F.
    pub c_ground: f64,
    /// `None` disables every resonator.
    pub resonator: Option<ResonatorParams>,
    /// Resonator attaches at the node after this many cells of a supercell.
    pub resonator_after_cell: usize,
    pub cells_per_supercell: usize,
    pub n_unit_cells: usize,
    pub corner_positions: BTreeSet<usize>,
    /// Extra electrical length of a corner cell in rad at `corner_ref_hz`.
    pub corner_extra_phase: f64,
    pub corner_ref_hz: f64,
    /// Characteristic impedance of the corner line segment in ohm.
    pub corner_z: f64,
    pub z_system: f64,
}

impl Default for DeviceSpec {
    fn default() -> Self {
        let junction = JunctionParams::default();
        let z_system = 50.0;
        let n_unit_cells = 1648usize;
        let cells_per_supercell = 8;
        let n_supercells = n_unit_cells.div_ceil(cells_per_supercell);
        Self {
            junction,
            c_ground: matched_ground_capacitance(&junction, z_system),
            resonator: Some(ResonatorParams::default()),
            resonator_after_cell: cells_per_supercell / 2,
            cells_per_supercell,
            n_unit_cells,
            corner_positions: evenly_spaced_corners(n_supercells, 9),
            corner_extra_phase: 0.05,
            corner_ref_hz: 7.5e9,
            corner_z: z_system,
            z_system,
        }
    }
}

/// `L_branch / z^2`: the shunt capacitance giving a `z`-ohm ladder at low
/// frequency.
pub fn matched_ground_capacitance(j: &JunctionParams, z_system: f64) -> f64 {
    j.branch_inductance().map_or(0.0, |l| l / (z_system * z_system))
}

/// `count` corner supercells splitting `n_supercells` into `count + 1`
/// nearly equal rows.
pub fn evenly_spaced_corners(n_supercells: usize, count: usize) -> BTreeSet<usize> {
    (1..=count)
        .map(|k| ((k * n_supercells) as f64 / (count + 1) as f64).round() as usize)
        .filter(|&p| p < n_supercells)
        .collect()
}

impl DeviceSpec {
    /// Uniform ladder of `n` unit cells without resonators or corners.
    pub fn uniform(n_unit_cells: usize) -> Self {
        Self {
            resonator: None,
            n_unit_cells,
            corner_positions: BTreeSet::new(),
            ..Self::default()
        }
    }

    pub fn n_supercells(&self) -> usize {
        self.n_unit_cells.div_ceil(self.cells_per_supercell)
    }

    /// Number of unit cells in supercell `index` (the trailing one may be partial).
    pub fn cells_in_supercell(&self, index: usize) -> usize {
        let start = index * self.cells_per_supercell;
        self.cells_per_supercell.min(self.n_unit_cells.saturating_sub(start))
    }

    pub fn kind_of(&self, index: usize) -> SupercellKind {
        if self.corner_positions.contains(&index) {
            SupercellKind::Corner
        } else {
            SupercellKind::Standard
        }
    }

    /// Whether supercell `index` carries a resonator: standard, full-size
    /// supercells only.
    pub fn has_resonator(&self, index: usize) -> bool {
        self.resonator.is_some()
            && self.kind_of(index) == SupercellKind::Standard
            && self.cells_in_supercell(index) == self.cells_per_supercell
    }

    pub fn validate(&self) -> Result<()> {
        self.junction.validate()?;
        if !(self.c_ground >= 0.0 && self.c_ground.is_finite()) {
            return Err(Error::param("c_ground", format!("must be >= 0, got {}", self.c_ground)));
        }
        if let Some(r) = &self.resonator {
            r.validate()?;
        }
        if self.cells_per_supercell == 0 {
            return Err(Error::param("cells_per_supercell", "must be >= 1"));
        }
        if self.resonator_after_cell > self.cells_per_supercell {
            return Err(Error::param(
                "resonator_after_cell",
                format!("must be <= cells_per_supercell ({})", self.cells_per_supercell),
            ));
        }
        if self.n_unit_cells == 0 {
            return Err(Error::param("n_unit_cells", "must be >= 1"));
        }
        if let Some(&p) = self.corner_positions.iter().find(|&&p| p >= self.n_supercells()) {
            return Err(Error::param(
                "corner_positions",
                format!("index {p} outside [0, {})", self.n_supercells()),
            ));
        }
        for (name, v) in [
            ("z_system", self.z_system),
            ("corner_z", self.corner_z),
            ("corner_ref_hz", self.corner_ref_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        if !self.corner_extra_phase.is_finite() {
            return Err(Error::param("corner_extra_phase", "must be finite"));
        }
        Ok(())
    }

    /// Low-frequency cutoff of the uniform ladder, `1 / (pi sqrt(L C))`.
    pub fn ladder_cutoff(&self) -> Result<f64> {
        let l = self.junction.branch_inductance()?;
        Ok(1.0 / (PI * (l * self.c_ground).sqrt()))
    }

    /// Low-frequency image impedance `sqrt(L / C)` of a unit cell.
    pub fn image_impedance(&self) -> Result<f64> {
        Ok((self.junction.branch_inductance()? / self.c_ground).sqrt())
    }

    /// Low-frequency one-way delay of the unit-cell ladder, `N sqrt(L C)`.
    pub fn ladder_delay(&self) -> Result<f64> {
        Ok(self.n_unit_cells as f64 * (self.junction.branch_inductance()? * self.c_ground).sqrt())
    }

    fn corner_line(&self, f: f64) -> Option<Matrix2<Complex64>> {
        (self.corner_extra_phase != 0.0)
            .then(|| line_matrix(self.corner_z, self.corner_extra_phase * f / self.corner_ref_hz))
    }
}

fn checked_shunt(y: Complex64, f: f64, what: &str) -> Result<Matrix2<Complex64>> {
    if !(y.re.is_finite() && y.im.is_finite()) {
        return Err(Error::SingularElement {
            freq_hz: f,
            what: format!("{what} admittance is not finite"),
        });
    }
    Ok(shunt_matrix(y))
}

fn unit_cell_matrix(spec: &DeviceSpec, f: f64) -> Result<Matrix2<Complex64>> {
    let z = unit_cell_branch_impedance(&spec.junction, f)?;
    let y = J * (angular(f) * spec.c_ground);
    Ok(series_matrix(z) * shunt_matrix(y))
}

fn supercell_matrix(
    spec: &DeviceSpec,
    f: f64,
    n_cells: usize,
    kind: SupercellKind,
    with_resonator: bool,
) -> Result<Matrix2<Complex64>> {
    let cell = unit_cell_matrix(spec, f)?;
    let mut m = Matrix2::identity();
    for c in 0..n_cells {
        m *= cell;
        if with_resonator && c + 1 == spec.resonator_after_cell {
            if let Some(r) = &spec.resonator {
                m *= checked_shunt(r.admittance_at(angular(f)), f, "resonator")?;
            }
        }
    }
    if with_resonator && spec.resonator_after_cell == 0 {
        if let Some(r) = &spec.resonator {
            m = checked_shunt(r.admittance_at(angular(f)), f, "resonator")? * m;
        }
    }
    if kind == SupercellKind::Corner {
        if let Some(line) = spec.corner_line(f) {
            m *= line;
        }
    }
    Ok(m)
}

/// One unit cell: series junction branch followed by the shunt ground capacitor.
pub fn build_unit_cell(spec: &DeviceSpec, grid: &FrequencyGrid) -> Result<AbcdTwoPort> {
    spec.validate()?;
    AbcdTwoPort::try_from_fn(grid, |f| unit_cell_matrix(spec, f))
}

/// A full-size supercell of the given kind.
pub fn build_supercell(spec: &DeviceSpec, grid: &FrequencyGrid, kind: SupercellKind) -> Result<AbcdTwoPort> {
    spec.validate()?;
    let with_res = kind == SupercellKind::Standard && spec.resonator.is_some();
    AbcdTwoPort::try_from_fn(grid, |f| {
        supercell_matrix(spec, f, spec.cells_per_supercell, kind, with_res)
    })
}

/// Supercell `index` as it appears in the device (corner, partial or standard).
pub fn build_supercell_at(spec: &DeviceSpec, grid: &FrequencyGrid, index: usize) -> Result<AbcdTwoPort> {
    spec.validate()?;
    let (n, kind, res) = (spec.cells_in_supercell(index), spec.kind_of(index), spec.has_resonator(index));
    AbcdTwoPort::try_from_fn(grid, |f| supercell_matrix(spec, f, n, kind, res))
}

/// Scattering parameters of supercell `index` at the system impedance,
/// suitable for Touchstone export and later substitution.
pub fn export_supercell(spec: &DeviceSpec, grid: &FrequencyGrid, index: usize) -> Result<Network> {
    abcd_to_s(&build_supercell_at(spec, grid, index)?, spec.z_system)
}

/// Reduces a supercell block to its two RF ports. Blocks with junction
/// ports (port 3 onwards, one per unit cell) get each of them closed by the
/// linear junction-branch impedance.
pub fn fold_branch_ports(spec: &DeviceSpec, net: &Network, index: usize) -> Result<Network> {
    let n_cells = spec.cells_in_supercell(index);
    match net.n_ports() {
        2 => Ok(net.clone()),
        n if n == 2 + n_cells => {
            let ports: Vec<usize> = (2..n).collect();
            net.reduce_ports_with(&ports, |p, f| {
                let z = unit_cell_branch_impedance(&spec.junction, f)?;
                let z0 = net.z_ref()[p];
                Ok((z - z0) / (z + z0))
            })
        }
        n => Err(Error::param(
            "overrides",
            format!("supercell {index} override has {n} ports; expected 2 or {}", 2 + n_cells),
        )),
    }
}

/// Ordered two-port blocks of the whole device. `overrides` replaces
/// supercells by index (interpolated to `grid`, junction ports folded by
/// [`fold_branch_ports`]).
pub fn build_device_chain(
    spec: &DeviceSpec,
    grid: &FrequencyGrid,
    overrides: &BTreeMap<usize, Network>,
) -> Result<Vec<AbcdTwoPort>> {
    spec.validate()?;
    let n_sc = spec.n_supercells();
    if let Some(&k) = overrides.keys().find(|&&k| k >= n_sc) {
        return Err(Error::param(
            "overrides",
            format!("supercell index {k} outside [0, {n_sc})"),
        ));
    }
    let mut standard: Option<AbcdTwoPort> = None;
    let mut blocks = Vec::with_capacity(n_sc);
    for idx in 0..n_sc {
        if let Some(net) = overrides.get(&idx) {
            let net = fold_branch_ports(spec, &net.interpolate(grid)?, idx)?.renormalize(&[spec.z_system; 2])?;
            blocks.push(s_to_abcd(&net)?);
            continue;
        }
        let is_plain = spec.kind_of(idx) == SupercellKind::Standard
            && spec.cells_in_supercell(idx) == spec.cells_per_supercell;
        if is_plain {
            if standard.is_none() {
                standard = Some(build_supercell_at(spec, grid, idx)?);
            }
            blocks.push(standard.clone().expect("built above"));
        } else {
            blocks.push(build_supercell_at(spec, grid, idx)?);
        }
    }
    Ok(blocks)
}

/// Pump-off two-port response of the assembled device.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpectrum {
    pub grid: FrequencyGrid,
    pub s11: Vec<Complex64>,
    pub s21: Vec<Complex64>,
    pub s12: Vec<Complex64>,
    pub s22: Vec<Complex64>,
    /// `20 log10 |S21|`, computed from a scaled product so it stays finite
    /// even where `s21` underflows.
    pub s21_db: Vec<f64>,
}

impl LinearSpectrum {
    pub fn s11_db(&self) -> Vec<f64> {
        self.s11.iter().map(|s| 20.0 * s.norm().log10()).collect()
    }

    /// Frequency of the global S21 minimum.
    pub fn min_s21_frequency(&self) -> f64 {
        let (i, _) = self
            .s21_db
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        self.grid[i]
    }

    /// Mean spacing between successive local maxima of |S11| inside
    /// `[f_lo, f_hi]`, i.e. the free spectral range of the standing-wave
    /// ripple. `None` with fewer than two maxima.
    pub fn ripple_spacing(&self, f_lo: f64, f_hi: f64) -> Option<f64> {
        let mag: Vec<f64> = self.s11.iter().map(|s| s.norm()).collect();
        let peaks: Vec<f64> = (1..mag.len().saturating_sub(1))
            .filter(|&i| mag[i] > mag[i - 1] && mag[i] >= mag[i + 1])
            .map(|i| self.grid[i])
            .filter(|&f| f >= f_lo && f <= f_hi)
            .collect();
        (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
    }
}

/// Cascades blocks keeping a running log-scale so products spanning
/// hundreds of decades (deep stopbands) do not overflow. Also returns the
/// product of the block determinants, which the normalized matrix can no
/// longer resolve.
fn scaled_chain(blocks: &[AbcdTwoPort], i: usize) -> (Matrix2<Complex64>, f64, Complex64) {
    let mut m = Matrix2::identity();
    let mut log_scale = 0.0;
    let mut det = Complex64::new(1.0, 0.0);
    for b in blocks {
        m *= b.at(i);
        det *= b.at(i).determinant();
        let s = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if s > 0.0 && s.is_finite() {
            m /= Complex64::new(s, 0.0);
            log_scale += s.ln();
        }
    }
    (m, log_scale, det)
}

/// Pump-off S11/S21 of the full device at `spec.z_system`.
pub fn linear_s21(
    spec: &DeviceSpec,
    grid: &FrequencyGrid,
    overrides: &BTreeMap<usize, Network>,
) -> Result<LinearSpectrum> {
    let blocks = build_device_chain(spec, grid, overrides)?;
    chain_response(&blocks, grid, spec.z_system)
}

/// Two-port response of an ordered block list at reference `z0`.
pub fn chain_response(blocks: &[AbcdTwoPort], grid: &FrequencyGrid, z0: f64) -> Result<LinearSpectrum> {
    if blocks.iter().any(|b| b.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let n = grid.len();
    let mut out = LinearSpectrum {
        grid: grid.clone(),
        s11: Vec::with_capacity(n),
        s21: Vec::with_capacity(n),
        s12: Vec::with_capacity(n),
        s22: Vec::with_capacity(n),
        s21_db: Vec::with_capacity(n),
    };
    for (i, f) in grid.iter().enumerate() {
        let (m, log_scale, det) = scaled_chain(blocks, i);
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)] / z0, m[(1, 0)] * z0, m[(1, 1)]);
        let den = a + b + c + d;
        if den.norm() == 0.0 || !den.norm().is_finite() {
            return Err(Error::Singular {
                freq_hz: f,
                what: "device chain has no finite S representation".into(),
            });
        }
        let s21 = 2.0 * (-log_scale).exp() / den;
        out.s11.push((a + b - c - d) / den);
        out.s22.push((-a + b - c + d) / den);
        out.s21.push(s21);
        out.s12.push(s21 * det);
        let ln_s21 = 2f64.ln() - log_scale - den.norm().ln();
        out.s21_db.push(20.0 * ln_s21 / std::f64::consts::LN_10);
    }
    Ok(out)
}

/// Two-terminal element between consecutive ladder nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// Junction branch of global unit cell `cell`.
    Junction { cell: usize },
    /// Ideal line segment (corner surcharge).
    Line { z0: f64, theta_ref: f64, f_ref: f64 },
}

/// Element from a ladder node to ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shunt {
    Capacitor(f64),
    Resonator(ResonatorParams),
}

impl Shunt {
    /// Admittance at signed angular frequency `w`.
    pub fn admittance_at(&self, w: f64) -> Complex64 {
        match self {
            Shunt::Capacitor(c) => J * (w * c),
            Shunt::Resonator(r) => r.admittance_at(w),
        }
    }
}

/// Admittance matrix `[[y11, y12], [y12, y11]]` of a line segment at
/// signed angular frequency `w`; `None` where the segment is a half-wave
/// multiple (no admittance representation).
pub fn line_admittance(z0: f64, theta_ref: f64, f_ref: f64, w: f64) -> Option<(Complex64, Complex64)> {
    let theta = theta_ref * w / angular(f_ref);
    let s = theta.sin();
    if s.abs() < 1e-12 {
        return None;
    }
    Some((-J * (theta.cos() / (z0 * s)), J / (z0 * s)))
}

/// Nodal description of the device: a chain of nodes where link `i`
/// joins node `i` to node `i + 1`. Node 0 is the input port, the last node
/// the output port.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub links: Vec<Link>,
    pub shunts: Vec<Vec<Shunt>>,
    pub junction: JunctionParams,
    pub z_system: f64,
}

impl Ladder {
    pub fn from_spec(spec: &DeviceSpec) -> Result<Self> {
        spec.validate()?;
        let mut links = Vec::with_capacity(spec.n_unit_cells + spec.corner_positions.len());
        let mut shunts: Vec<Vec<Shunt>> = vec![Vec::new()];
        let mut cell = 0;
        for idx in 0..spec.n_supercells() {
            let res = spec.has_resonator(idx).then_some(spec.resonator).flatten();
            if let (Some(r), 0) = (res, spec.resonator_after_cell) {
                shunts.last_mut().expect("node").push(Shunt::Resonator(r));
            }
            for c in 0..spec.cells_in_supercell(idx) {
                links.push(Link::Junction { cell });
                cell += 1;
                let mut node = vec![Shunt::Capacitor(spec.c_ground)];
                if let Some(r) = res {
                    if c + 1 == spec.resonator_after_cell {
                        node.push(Shunt::Resonator(r));
                    }
                }
                shunts.push(node);
            }
            if spec.kind_of(idx) == SupercellKind::Corner && spec.corner_extra_phase != 0.0 {
                links.push(Link::Line {
                    z0: spec.corner_z,
                    theta_ref: spec.corner_extra_phase,
                    f_ref: spec.corner_ref_hz,
                });
                shunts.push(Vec::new());
            }
        }
        Ok(Self {
            links,
            shunts,
            junction: spec.junction,
            z_system: spec.z_system,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.shunts.len()
    }

    pub fn n_junctions(&self) -> usize {
        self.links.iter().filter(|l| matches!(l, Link::Junction { .. })).count()
    }

    /// Total shunt admittance at `node` (ports excluded).
    pub fn shunt_admittance(&self, node: usize, w: f64) -> Complex64 {
        self.shunts[node].iter().map(|s| s.admittance_at(w)).sum()
    }
}
