use std::fmt::Write as _;
use std::path::Path;

use twpa_core::device::linear_s21;
use twpa_core::hbsolver::{
    band_average_gain, conversion_gain, image_dip_frequency, solve_pump, sweep, GainSpectrum, PumpSolution,
};
use twpa_core::touchstone::{
    max_relative_difference, parse_touchstone, ports_from_path, write_touchstone, DataFormat, TouchstoneDocument,
};
use twpa_core::units::db20;

use crate::config::{RunConfig, Source};
use crate::error::CliError;
use crate::output::{num, write_file, write_manifest, Csv};

fn prepare(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.out_dir.display())))
}

fn reject_overrides(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    if cfg.overrides.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "overrides: not supported by `{command}`, the pump solver works on the lumped ladder only"
        )))
    }
}

pub fn cmd_linear(cfg: &RunConfig) -> Result<(), CliError> {
    prepare(cfg)?;
    let lin = linear_s21(&cfg.spec, &cfg.grid, &cfg.overrides)?;
    let s11_db = lin.s11_db();
    let mut csv = Csv::new(&["freq_hz", "s21_re", "s21_im", "s21_db", "s11_db"]);
    for i in 0..lin.grid.len() {
        csv.row(&[
            num(lin.grid[i]),
            num(lin.s21[i].re),
            num(lin.s21[i].im),
            num(lin.s21_db[i]),
            num(s11_db[i]),
        ]);
    }
    csv.write(&cfg.out_dir.join("linear_s21.csv"))?;
    write_manifest(&cfg.out_dir, "linear", &cfg.manifest)?;
    log::info!(
        "linear: {} points, S21 minimum at {} Hz",
        lin.grid.len(),
        lin.min_s21_frequency()
    );
    Ok(())
}

fn gain_csv(g: &GainSpectrum) -> Csv {
    let idler = g.idler_db();
    let mut csv = Csv::new(&["freq_hz", "gain_db", "s21_re", "s21_im", "idler_db"]);
    for i in 0..g.grid.len() {
        csv.row(&[
            num(g.grid[i]),
            num(g.gain_db[i]),
            num(g.s21_pumped[i].re),
            num(g.s21_pumped[i].im),
            num(idler[i]),
        ]);
    }
    csv
}

fn pump_report(sol: &PumpSolution) -> String {
    let (cell, phase) = sol.max_junction_phase();
    let mut s = String::new();
    let _ = writeln!(s, "f_p_hz = {}", num(sol.drive.f_p));
    let _ = writeln!(s, "p_dbm = {}", num(sol.drive.p_dbm));
    let _ = writeln!(s, "n_harmonics = {}", sol.drive.n_harmonics);
    let _ = writeln!(s, "ramp_steps = {}", sol.ramp_steps);
    let _ = writeln!(s, "iterations = {}", sol.iterations);
    let _ = writeln!(s, "residual = {}", num(sol.residual_norm));
    let _ = writeln!(s, "source_amplitude_v = {}", num(sol.source_amplitude));
    let _ = writeln!(s, "max_junction_phase_rad = {} (cell {cell})", num(phase));
    let _ = writeln!(s, "pump_transmission_db = {}", num(db20(sol.transmission(1).norm())));
    let _ = writeln!(s, "\n# pump amplitude profile, every 10th unit cell");
    let _ = writeln!(s, "cell,phase_amplitude_rad,branch_phase_fundamental_rad");
    for (i, a) in sol.junction_phase_amplitude.iter().enumerate().step_by(10) {
        let _ = writeln!(s, "{i},{},{}", num(*a), num(sol.branch_phase_harmonics[i][0].norm()));
    }
    s
}

pub fn cmd_gain(cfg: &RunConfig) -> Result<(), CliError> {
    reject_overrides(cfg, "gain")?;
    prepare(cfg)?;
    let sol = solve_pump(&cfg.spec, cfg.drive, &cfg.solver)?;
    write_file(&cfg.out_dir.join("pump_report.txt"), &pump_report(&sol))?;
    let g = conversion_gain(&sol, &cfg.spec, &cfg.grid, &cfg.gain)?;
    gain_csv(&g).write(&cfg.out_dir.join("gain.csv"))?;
    let mut manifest = cfg.manifest.clone();
    for f in &g.skipped {
        manifest.record("skipped_frequency_hz", num(*f), Source::Derived);
    }
    write_manifest(&cfg.out_dir, "gain", &manifest)?;
    let band = cfg.gain_band(cfg.drive.f_p);
    log::info!(
        "gain: pump converged in {} iterations, band-average gain {:?} dB",
        sol.iterations,
        band_average_gain(&g, &band)
    );
    Ok(())
}

fn status_code(e: &twpa_core::Error) -> &'static str {
    use twpa_core::Error as E;
    match e {
        E::Divergence { .. } => "divergence",
        E::Overdrive { .. } => "overdrive",
        E::Instability { .. } => "instability",
        E::InvalidParameter { .. } => "invalid",
        _ => "error",
    }
}

pub fn point_file_name(df: f64, dp: f64) -> String {
    format!("gain_df{df}_dp{dp}.csv")
}

pub fn cmd_sweep(cfg: &RunConfig, df_list: &[f64], dp_list: &[f64]) -> Result<(), CliError> {
    reject_overrides(cfg, "sweep")?;
    if df_list.is_empty() || dp_list.is_empty() {
        return Err(CliError::Config("df-list and dp-list must be non-empty".into()));
    }
    if let Some(v) = df_list.iter().chain(dp_list).find(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("sweep offsets must be finite, got {v}")));
    }
    prepare(cfg)?;
    let mut manifest = cfg.manifest.clone();
    manifest.record("sweep.df_list_hz", format!("{df_list:?}"), Source::CommandLine);
    manifest.record("sweep.dp_list_db", format!("{dp_list:?}"), Source::CommandLine);

    let points = sweep(&cfg.spec, cfg.drive, df_list, dp_list, &cfg.grid, &cfg.solver, &cfg.gain);
    let mut summary = Csv::new(&["df_hz", "dp_db", "band_average_gain_db", "dip_frequency_hz", "status"]);
    let mut failures = 0;
    for p in &points {
        match &p.outcome {
            Ok((_, g)) => {
                gain_csv(g).write(&cfg.out_dir.join(point_file_name(p.df, p.dp)))?;
                let band = cfg.gain_band(p.drive.f_p);
                let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
                summary.row(&[
                    num(p.df),
                    num(p.dp),
                    opt(band_average_gain(g, &band)),
                    opt(image_dip_frequency(g, &band, cfg.dip_window)),
                    "converged".into(),
                ]);
            }
            Err(e) => {
                failures += 1;
                summary.row(&[num(p.df), num(p.dp), String::new(), String::new(), status_code(e).into()]);
            }
        }
    }
    summary.write(&cfg.out_dir.join("sweep_summary.csv"))?;
    write_manifest(&cfg.out_dir, "sweep", &manifest)?;
    if failures == points.len() {
        return Err(CliError::Solver(format!("all {failures} sweep points failed")));
    }
    if failures > 0 {
        log::warn!("{failures} of {} sweep points failed", points.len());
    }
    Ok(())
}

pub fn read_touchstone(path: &Path) -> Result<TouchstoneDocument, CliError> {
    let n = ports_from_path(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_touchstone(&text, n).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn touchstone_info(path: &Path) -> Result<String, CliError> {
    Ok(read_touchstone(path)?.summary())
}

pub fn touchstone_convert(input: &Path, output: &Path, format: DataFormat, precision: usize) -> Result<(), CliError> {
    let doc = read_touchstone(input)?;
    write_file(output, &write_touchstone(&doc, format, precision))
}

/// Max relative error of parse, write, parse.
pub fn touchstone_roundtrip(path: &Path, format: DataFormat, precision: usize) -> Result<f64, CliError> {
    let doc = read_touchstone(path)?;
    let n = doc.network.n_ports();
    let again = parse_touchstone(&write_touchstone(&doc, format, precision), n)?;
    Ok(max_relative_difference(&doc.network, &again.network, 1e-300)?)
}
