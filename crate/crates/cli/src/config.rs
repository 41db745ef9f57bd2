//! TOML run configuration and its resolution into core types.
//!
//! Every key is optional. Resolution fills gaps from the library defaults
//! and records each value, with where it came from, in a [`Manifest`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use twpa_core::device::{
    evenly_spaced_corners, matched_ground_capacitance, DeviceSpec, JunctionParams, ResonatorParams,
};
use twpa_core::hbsolver::{GainBand, GainOptions, Normalization, PumpDrive, SolverOptions};
use twpa_core::netcore::Network;
use twpa_core::touchstone::{parse_touchstone, ports_from_path};
use twpa_core::FrequencyGrid;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub device: RawDevice,
    #[serde(default)]
    pub pump: RawPump,
    #[serde(default)]
    pub signal_band: RawBand,
    #[serde(default)]
    pub solver: RawSolver,
    #[serde(default)]
    pub analysis: RawAnalysis,
    pub normalization: Option<String>,
    #[serde(default)]
    pub overrides: Vec<RawOverride>,
    #[serde(default)]
    pub output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDevice {
    pub n_unit_cells: Option<usize>,
    pub cells_per_supercell: Option<usize>,
    pub i_c_a: Option<f64>,
    pub c_j_f: Option<f64>,
    pub n_series: Option<usize>,
    pub l_scale: Option<f64>,
    pub c_ground_f: Option<f64>,
    pub z_system_ohm: Option<f64>,
    pub resonator_after_cell: Option<usize>,
    #[serde(default)]
    pub resonator: RawResonator,
    #[serde(default)]
    pub corners: RawCorners,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawResonator {
    pub enabled: Option<bool>,
    pub f_r_hz: Option<f64>,
    pub c_r_f: Option<f64>,
    pub r_loss_ohm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCorners {
    pub count: Option<usize>,
    pub positions: Option<Vec<usize>>,
    pub extra_phase_rad: Option<f64>,
    pub ref_hz: Option<f64>,
    pub z_ohm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPump {
    pub f_p_hz: Option<f64>,
    pub p_dbm: Option<f64>,
    pub n_harmonics: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBand {
    pub f_start_hz: Option<f64>,
    pub f_stop_hz: Option<f64>,
    pub f_step_hz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub n_steps: Option<usize>,
    pub max_halvings: Option<usize>,
    pub oversampling: Option<usize>,
    pub k_sb: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAnalysis {
    pub band_half_width_hz: Option<f64>,
    pub dip_guard_hz: Option<f64>,
    pub dip_window_hz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOverride {
    pub supercell: usize,
    pub path: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Config,
    Default,
    Derived,
    CommandLine,
}

impl Source {
    fn tag(self) -> &'static str {
        match self {
            Source::Config => "config",
            Source::Default => "default",
            Source::Derived => "derived",
            Source::CommandLine => "command line",
        }
    }
}

pub trait ManifestValue: Copy {
    fn show(self) -> String;
}

impl ManifestValue for f64 {
    fn show(self) -> String {
        if self == 0.0 || (1e-3..1e6).contains(&self.abs()) {
            format!("{self}")
        } else {
            format!("{self:e}")
        }
    }
}

impl ManifestValue for usize {
    fn show(self) -> String {
        self.to_string()
    }
}

impl ManifestValue for bool {
    fn show(self) -> String {
        self.to_string()
    }
}

/// Resolved parameters in resolution order.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: Vec<(String, String, Source)>,
}

impl Manifest {
    pub fn record(&mut self, key: &str, value: impl Display, source: Source) {
        self.entries.push((key.to_string(), value.to_string(), source));
    }

    fn pick<T: ManifestValue>(&mut self, key: &str, given: Option<T>, default: T) -> T {
        let (v, s) = match given {
            Some(v) => (v, Source::Config),
            None => (default, Source::Default),
        };
        self.record(key, v.show(), s);
        v
    }

    pub fn render(&self) -> String {
        let width = self.entries.iter().map(|e| e.0.len()).max().unwrap_or(0);
        self.entries
            .iter()
            .map(|(k, v, s)| format!("{k:<width$} = {v}  # {}\n", s.tag()))
            .collect()
    }
}

/// Everything a command needs, fully resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: DeviceSpec,
    pub drive: PumpDrive,
    pub grid: FrequencyGrid,
    pub solver: SolverOptions,
    pub gain: GainOptions,
    pub band_half_width: f64,
    pub dip_guard: f64,
    pub dip_window: f64,
    pub overrides: BTreeMap<usize, Network>,
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

impl RunConfig {
    pub fn gain_band(&self, f_p: f64) -> GainBand {
        GainBand {
            half_width: self.band_half_width,
            dip_guard: self.dip_guard,
            ..GainBand::new(f_p, self.spec.resonator.map(|r| r.f_r))
        }
    }
}

pub fn load(path: Option<&Path>, out: Option<&Path>) -> Result<RunConfig, CliError> {
    let (raw, base) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let raw: RawConfig = toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            (raw, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (RawConfig::default(), PathBuf::new()),
    };
    resolve(raw, &base, out)
}

fn invalid(path: &str, reason: impl Display) -> CliError {
    CliError::Config(format!("{path}: {reason}"))
}

fn positive(path: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(path, format!("must be > 0, got {v}")))
    }
}

/// Field path of a core parameter name.
pub fn field_path(name: &str) -> String {
    let p = match name {
        "i_c" => "device.i_c_a",
        "c_j" => "device.c_j_f",
        "n_series" => "device.n_series",
        "l_scale" => "device.l_scale",
        "c_ground" => "device.c_ground_f",
        "z_system" => "device.z_system_ohm",
        "n_unit_cells" => "device.n_unit_cells",
        "cells_per_supercell" => "device.cells_per_supercell",
        "resonator_after_cell" => "device.resonator_after_cell",
        "f_r" => "device.resonator.f_r_hz",
        "c_r" => "device.resonator.c_r_f",
        "r_loss" => "device.resonator.r_loss_ohm",
        "corner_positions" => "device.corners.positions",
        "corner_extra_phase" => "device.corners.extra_phase_rad",
        "corner_ref_hz" => "device.corners.ref_hz",
        "corner_z" => "device.corners.z_ohm",
        "overrides" => "overrides",
        "f_p" => "pump.f_p_hz",
        "p_dbm" => "pump.p_dbm",
        "n_harmonics" => "pump.n_harmonics",
        "tol" => "solver.tol",
        "max_iter" => "solver.max_iter",
        "n_steps" => "solver.n_steps",
        "oversampling" => "solver.oversampling",
        "k_sb" => "solver.k_sb",
        other => return other.to_string(),
    };
    p.to_string()
}

pub fn resolve(raw: RawConfig, base: &Path, out: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut m = Manifest::default();
    let d = raw.device;
    let dj = JunctionParams::default();
    let ds = DeviceSpec::default();

    let junction = JunctionParams {
        i_c: m.pick("device.i_c_a", d.i_c_a, dj.i_c),
        c_j: m.pick("device.c_j_f", d.c_j_f, dj.c_j),
        n_series: m.pick("device.n_series", d.n_series, dj.n_series),
        l_scale: m.pick("device.l_scale", d.l_scale, dj.l_scale),
    };
    let z_system = m.pick("device.z_system_ohm", d.z_system_ohm, ds.z_system);
    let c_ground = match d.c_ground_f {
        Some(c) => {
            m.record("device.c_ground_f", c.show(), Source::Config);
            c
        }
        None => {
            let c = matched_ground_capacitance(&junction, z_system);
            m.record("device.c_ground_f", c.show(), Source::Derived);
            c
        }
    };
    let n_unit_cells = m.pick("device.n_unit_cells", d.n_unit_cells, ds.n_unit_cells);
    let cells_per_supercell = m.pick("device.cells_per_supercell", d.cells_per_supercell, ds.cells_per_supercell);
    if cells_per_supercell == 0 {
        return Err(invalid("device.cells_per_supercell", "must be >= 1"));
    }
    let resonator_after_cell = match d.resonator_after_cell {
        Some(v) => {
            m.record("device.resonator_after_cell", v, Source::Config);
            v
        }
        None => {
            let v = cells_per_supercell / 2;
            m.record("device.resonator_after_cell", v, Source::Derived);
            v
        }
    };

    let rd = ResonatorParams::default();
    let r = d.resonator;
    let enabled = m.pick("device.resonator.enabled", r.enabled, true);
    let resonator_params = ResonatorParams {
        f_r: m.pick("device.resonator.f_r_hz", r.f_r_hz, rd.f_r),
        c_r: m.pick("device.resonator.c_r_f", r.c_r_f, rd.c_r),
        r_loss: m.pick("device.resonator.r_loss_ohm", r.r_loss_ohm, rd.r_loss),
    };
    let resonator = enabled.then_some(resonator_params);
    if let Some(res) = &resonator {
        if res.f_r > 0.0 && res.c_r > 0.0 {
            m.record("device.resonator.l_r_h", res.l_r().show(), Source::Derived);
        }
    }

    let c = d.corners;
    let n_supercells = n_unit_cells.div_ceil(cells_per_supercell);
    let corner_positions: BTreeSet<usize> = match (c.count, c.positions) {
        (Some(_), Some(_)) => {
            return Err(invalid("device.corners", "set either `count` or `positions`, not both"));
        }
        (_, Some(p)) => {
            let set: BTreeSet<usize> = p.into_iter().collect();
            m.record("device.corners.positions", format!("{set:?}"), Source::Config);
            set
        }
        (count, None) => {
            let count = m.pick("device.corners.count", count, 9);
            let set = evenly_spaced_corners(n_supercells, count);
            m.record("device.corners.positions", format!("{set:?}"), Source::Derived);
            set
        }
    };
    let spec = DeviceSpec {
        junction,
        c_ground,
        resonator,
        resonator_after_cell,
        cells_per_supercell,
        n_unit_cells,
        corner_positions,
        corner_extra_phase: m.pick("device.corners.extra_phase_rad", c.extra_phase_rad, ds.corner_extra_phase),
        corner_ref_hz: m.pick("device.corners.ref_hz", c.ref_hz, ds.corner_ref_hz),
        corner_z: m.pick("device.corners.z_ohm", c.z_ohm, z_system),
        z_system,
    };
    spec.validate().map_err(core_config_error)?;

    let pd = PumpDrive::default();
    let drive = PumpDrive {
        f_p: m.pick("pump.f_p_hz", raw.pump.f_p_hz, pd.f_p),
        p_dbm: m.pick("pump.p_dbm", raw.pump.p_dbm, pd.p_dbm),
        n_harmonics: m.pick("pump.n_harmonics", raw.pump.n_harmonics, pd.n_harmonics),
    };
    drive.validate().map_err(core_config_error)?;

    let b = raw.signal_band;
    let f_start = positive("signal_band.f_start_hz", m.pick("signal_band.f_start_hz", b.f_start_hz, 4e9))?;
    let f_stop = positive("signal_band.f_stop_hz", m.pick("signal_band.f_stop_hz", b.f_stop_hz, 11e9))?;
    let f_step = positive("signal_band.f_step_hz", m.pick("signal_band.f_step_hz", b.f_step_hz, 10e6))?;
    if f_start >= f_stop {
        return Err(invalid(
            "signal_band.f_start_hz",
            format!("must be < signal_band.f_stop_hz ({f_start} >= {f_stop})"),
        ));
    }
    let grid = FrequencyGrid::linspace_step(f_start, f_stop, f_step)
        .map_err(|e| invalid("signal_band", e))?;
    m.record("signal_band.points", grid.len(), Source::Derived);

    let sd = SolverOptions::default();
    let s = raw.solver;
    let solver = SolverOptions {
        tol: m.pick("solver.tol", s.tol, sd.tol),
        max_iter: m.pick("solver.max_iter", s.max_iter, sd.max_iter),
        n_steps: m.pick("solver.n_steps", s.n_steps, sd.n_steps),
        max_halvings: m.pick("solver.max_halvings", s.max_halvings, sd.max_halvings),
        oversampling: m.pick("solver.oversampling", s.oversampling, sd.oversampling),
    };
    solver.validate().map_err(core_config_error)?;
    let gd = GainOptions::default();
    let k_sb = m.pick("solver.k_sb", s.k_sb, gd.k_sb);
    if k_sb == 0 {
        return Err(invalid("solver.k_sb", "must be >= 1"));
    }
    let normalization = match raw.normalization {
        Some(n) => {
            let v: Normalization = n.parse().map_err(|e: String| invalid("normalization", e))?;
            m.record("normalization", v.as_str(), Source::Config);
            v
        }
        None => {
            m.record("normalization", gd.normalization.as_str(), Source::Default);
            gd.normalization
        }
    };

    let a = raw.analysis;
    let band_half_width = positive(
        "analysis.band_half_width_hz",
        m.pick("analysis.band_half_width_hz", a.band_half_width_hz, GainBand::DEFAULT_HALF_WIDTH),
    )?;
    let dip_guard = m.pick("analysis.dip_guard_hz", a.dip_guard_hz, GainBand::DEFAULT_DIP_GUARD);
    if !(dip_guard >= 0.0 && dip_guard.is_finite()) {
        return Err(invalid("analysis.dip_guard_hz", format!("must be >= 0, got {dip_guard}")));
    }
    let dip_window = positive(
        "analysis.dip_window_hz",
        m.pick("analysis.dip_window_hz", a.dip_window_hz, 100e6),
    )?;

    let mut overrides = BTreeMap::new();
    for (i, o) in raw.overrides.into_iter().enumerate() {
        let key = format!("overrides[{i}]");
        let path = if o.path.is_absolute() { o.path } else { base.join(o.path) };
        if !path.is_file() {
            return Err(invalid(&format!("{key}.path"), format!("{} does not exist", path.display())));
        }
        if o.supercell >= n_supercells {
            return Err(invalid(
                &format!("{key}.supercell"),
                format!("index {} outside [0, {n_supercells})", o.supercell),
            ));
        }
        let n = ports_from_path(&path).map_err(|e| invalid(&format!("{key}.path"), e))?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let doc = parse_touchstone(&text, n).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        m.record(&format!("{key}.supercell"), o.supercell, Source::Config);
        m.record(&format!("{key}.path"), path.display(), Source::Config);
        if overrides.insert(o.supercell, doc.network).is_some() {
            return Err(invalid(&format!("{key}.supercell"), "duplicate supercell index"));
        }
    }

    let out_dir = match (out, raw.output.dir) {
        (Some(o), _) => {
            m.record("output.dir", o.display(), Source::CommandLine);
            o.to_path_buf()
        }
        (None, Some(d)) => {
            let d = if d.is_absolute() { d } else { base.join(d) };
            m.record("output.dir", d.display(), Source::Config);
            d
        }
        (None, None) => {
            let d = PathBuf::from("twpa_out");
            m.record("output.dir", d.display(), Source::Default);
            d
        }
    };

    Ok(RunConfig {
        spec,
        drive,
        grid,
        solver,
        gain: GainOptions { k_sb, normalization },
        band_half_width,
        dip_guard,
        dip_window,
        overrides,
        out_dir,
        manifest: m,
    })
}

fn core_config_error(e: twpa_core::Error) -> CliError {
    match e {
        twpa_core::Error::InvalidParameter { name, reason } => invalid(&field_path(name), reason),
        other => CliError::Config(other.to_string()),
    }
}
