use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use twpa_core::device::*;
use twpa_core::hbsolver::*;
use twpa_core::{Error, FrequencyGrid};

const PHI0_RED: f64 = 2.067_833_848e-15 / (2.0 * PI);

fn flatten(x: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(x.iter().map(|b| b.len()).sum(), x.iter().flat_map(|b| b.iter().copied()))
}

fn unflatten(v: &DVector<f64>, bs: usize) -> Vec<DVector<f64>> {
    v.as_slice().chunks(bs).map(DVector::from_column_slice).collect()
}

#[test]
fn jacobian_matches_central_differences() {
    let spec = DeviceSpec::uniform(5);
    let drive = PumpDrive { n_harmonics: 3, p_dbm: -68.0, ..Default::default() };
    let opts = SolverOptions::default();
    let hb = HarmonicBalance::new(&spec, drive, &opts).unwrap();
    let sol = hb.solve(&opts, None).unwrap();
    // Off the solution, with every harmonic populated.
    let mut x = flatten(&hb.state_from(&sol, 1.0));
    let scale = x.amax();
    for (i, v) in x.iter_mut().enumerate() {
        *v += 0.1 * scale * ((i as f64 * 0.7).sin());
    }
    let bs = hb.block_size();
    let analytic = hb.jacobian(&unflatten(&x, bs)).to_dense();
    let n = x.len();
    let h = 1e-4 * scale;
    let mut fd = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += h;
        xm[c] -= h;
        let fp = flatten(&hb.residual(&unflatten(&xp, bs), 1.0));
        let fm = flatten(&hb.residual(&unflatten(&xm, bs), 1.0));
        fd.set_column(c, &((fp - fm) / (2.0 * h)));
    }
    let rel = (&fd - &analytic).norm() / analytic.norm();
    assert!(rel < 1e-6, "{rel:e}");
}

/// Periodic steady state of one unit cell between two 50 ohm ports,
/// integrated in time with fixed-step RK4. Returns the output node
/// fundamental phasor, `v(t) = Re V e^{j w t}`.
fn transient_output_phasor(spec: &DeviceSpec, f_p: f64, vs: f64) -> Complex64 {
    let j = &spec.junction;
    let n = j.n_series as f64 * j.l_scale;
    let cb = j.c_j / j.n_series as f64;
    let cg = spec.c_ground;
    let z0 = spec.z_system;
    let w = 2.0 * PI * f_p;
    let deriv = |t: f64, s: [f64; 3]| -> [f64; 3] {
        let [phi, u, v1] = s;
        let i_s = (vs * (w * t).cos() - u - v1) / z0;
        [u / PHI0_RED, (i_s - j.i_c * (phi / n).sin()) / cb, (i_s - v1 / z0) / cg]
    };
    let m = 8192;
    let dt = 1.0 / (f_p * m as f64);
    let periods = 40;
    let mut s = [0.0; 3];
    let mut acc = Complex64::new(0.0, 0.0);
    for step in 0..periods * m {
        let t = step as f64 * dt;
        if step >= (periods - 1) * m {
            acc += s[2] * Complex64::from_polar(1.0, -w * t);
        }
        let k1 = deriv(t, s);
        let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
        let k2 = deriv(t + dt / 2.0, add(s, k1, dt / 2.0));
        let k3 = deriv(t + dt / 2.0, add(s, k2, dt / 2.0));
        let k4 = deriv(t + dt, add(s, k3, dt));
        for i in 0..3 {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    acc * (2.0 / m as f64)
}

#[test]
fn single_cell_matches_transient_integration() {
    let spec = DeviceSpec::uniform(1);
    let opts = SolverOptions { tol: 1e-13, ..Default::default() };
    for p_dbm in [-95.0, -75.0, -67.0] {
        let drive = PumpDrive { p_dbm, n_harmonics: 7, ..Default::default() };
        let sol = solve_pump(&spec, drive, &opts).unwrap();
        let hb = sol.node_phasors[1][0];
        let td = transient_output_phasor(&spec, drive.f_p, sol.source_amplitude);
        let rel = (hb - td).norm() / td.norm();
        assert!(rel < 1e-6, "{p_dbm} dBm: phase {:.3}, rel {rel:e}", sol.max_junction_phase().1);
    }
}

#[test]
fn vanishing_pump_reproduces_linear_response() {
    let spec = DeviceSpec::default();
    let grid = FrequencyGrid::linspace_step(4e9, 11e9, 10e6).unwrap();
    let drive = PumpDrive { p_dbm: -200.0, ..Default::default() };
    let sol = solve_pump(&spec, drive, &SolverOptions::default()).unwrap();
    let gain = conversion_gain(&sol, &spec, &grid, &GainOptions::default()).unwrap();
    let lin = linear_s21(&spec, &gain.grid, &BTreeMap::new()).unwrap();
    assert_eq!(gain.skipped, vec![7.5e9]);
    for i in 0..gain.grid.len() {
        let d = (gain.gain_db[i] - lin.s21_db[i]).abs();
        if lin.s21_db[i] > -300.0 {
            assert!(d < 1e-3, "{} Hz: {} vs {}", gain.grid[i], gain.gain_db[i], lin.s21_db[i]);
        } else {
            // Deep in the resonator stopband the residual pump still opens
            // a signal-idler-signal path far above the linear transmission.
            assert!((gain.s21_pumped[i] - lin.s21[i]).norm() < 1e-20);
        }
    }
    let rel = conversion_gain(
        &sol,
        &spec,
        &gain.grid,
        &GainOptions { normalization: Normalization::RelativeToLinear, ..Default::default() },
    )
    .unwrap();
    for (g, l) in rel.gain_db.iter().zip(&lin.s21_db) {
        assert!(*l < -300.0 || g.abs() < 1e-3);
    }
}

fn lossless_instance(n: usize) -> DeviceSpec {
    let mut spec = DeviceSpec { n_unit_cells: n, ..DeviceSpec::default() };
    spec.corner_positions = evenly_spaced_corners(spec.n_supercells(), 2);
    spec.resonator.as_mut().unwrap().r_loss = 0.0;
    spec
}

#[test]
fn photon_number_is_conserved_on_lossless_instances() {
    for n in [10, 200] {
        let spec = lossless_instance(n);
        let sol = solve_pump(&spec, PumpDrive::default(), &SolverOptions::default()).unwrap();
        let pumped = PumpedLadder::new(&sol, &spec, 1).unwrap();
        let band = GainBand::new(7.5e9, Some(7.62e9));
        let mut f = 6.505e9;
        while f < 8.5e9 {
            if band.contains(f) {
                for port in [0, 1] {
                    let r = pumped.response(f, port).unwrap();
                    let b = r.photon_balance();
                    assert!((b - 1.0).abs() < 1e-9, "{n} cells, {f} Hz, port {port}: {b}");
                }
            }
            f += 10e6;
        }
    }
}

#[test]
fn pump_off_sideband_system_is_reciprocal() {
    let spec = DeviceSpec { n_unit_cells: 200, corner_positions: [7, 15].into_iter().collect(), ..DeviceSpec::default() };
    let sol = solve_pump(&spec, PumpDrive { p_dbm: -200.0, ..Default::default() }, &SolverOptions::default()).unwrap();
    let pumped = PumpedLadder::new(&sol, &spec, 1).unwrap();
    for f in [4.1e9, 6.0e9, 7.3e9, 7.62e9, 9.9e9] {
        let s21 = pumped.response(f, 0).unwrap().transmission();
        let s12 = pumped.response(f, 1).unwrap().transmission();
        assert!((s21 - s12).norm() < 1e-10, "{f}");
    }
}

#[test]
fn pumped_device_has_gain_and_power_ordering() {
    let spec = DeviceSpec::default();
    let grid = FrequencyGrid::linspace_step(6.4e9, 8.6e9, 20e6).unwrap();
    let band = GainBand::new(7.5e9, spec.resonator.map(|r| r.f_r));
    let mut spectra = Vec::new();
    for dp in [-1.0, 0.0, 1.0] {
        let drive = PumpDrive { p_dbm: -70.2 + dp, ..Default::default() };
        let sol = solve_pump(&spec, drive, &SolverOptions::default()).unwrap();
        assert!(sol.ramp_steps <= 5 && sol.residual_norm <= 1e-9);
        spectra.push(conversion_gain(&sol, &spec, &grid, &GainOptions::default()).unwrap());
    }
    let idx = band_frequencies(&spectra[1], &band);
    assert!(idx.len() > 50);
    for &i in &idx {
        let g: Vec<f64> = spectra.iter().map(|s| s.gain_db[i]).collect();
        assert!(g[1] > 0.0, "{} Hz: {}", grid[i], g[1]);
        assert!(g[0] < g[1] && g[1] < g[2], "{} Hz: {g:?}", grid[i]);
    }
}

#[test]
fn gain_is_converged_in_pump_harmonics() {
    let spec = lossless_instance(400);
    let grid = FrequencyGrid::linspace_step(6.505e9, 7.305e9, 50e6).unwrap();
    let gain_for = |k: usize| {
        let drive = PumpDrive { n_harmonics: k, ..Default::default() };
        let sol = solve_pump(&spec, drive, &SolverOptions::default()).unwrap();
        conversion_gain(&sol, &spec, &grid, &GainOptions::default()).unwrap().gain_db
    };
    let (g1, g3, g5) = (gain_for(1), gain_for(3), gain_for(5));
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff(&g3, &g5) < 0.05, "{}", diff(&g3, &g5));
    assert!(diff(&g3, &g5) <= diff(&g1, &g5));
}

#[test]
fn sweep_single_point_equals_direct_solve() {
    let spec = DeviceSpec { n_unit_cells: 160, corner_positions: [10].into_iter().collect(), ..DeviceSpec::default() };
    let grid = FrequencyGrid::linspace_step(6.0e9, 7.0e9, 100e6).unwrap();
    let opts = SolverOptions::default();
    let gopts = GainOptions::default();
    let pts = sweep(&spec, PumpDrive::default(), &[0.0], &[0.0], &grid, &opts, &gopts);
    assert_eq!(pts.len(), 1);
    let (sol, g) = pts[0].outcome.as_ref().unwrap();
    let direct_sol = solve_pump(&spec, PumpDrive::default(), &opts).unwrap();
    let direct = conversion_gain(&direct_sol, &spec, &grid, &gopts).unwrap();
    assert_eq!(sol, &direct_sol);
    assert_eq!(g, &direct);
}

#[test]
fn sweep_dip_follows_pump_frequency_and_gain_grows_with_power() {
    let spec = DeviceSpec::default();
    let f_r = spec.resonator.unwrap().f_r;
    let grid = FrequencyGrid::linspace_step(6.4e9, 8.6e9, 10e6).unwrap();
    let base = PumpDrive::default();
    let df = [-50e6, 0.0, 50e6];
    let dp = [-1.0, 0.0, 1.0];
    let pts = sweep(&spec, base, &df, &dp, &grid, &SolverOptions::default(), &GainOptions::default());
    assert_eq!(pts.len(), 9);
    let at = |i: usize, j: usize| pts[3 * i + j].outcome.as_ref().unwrap();

    let dips: Vec<f64> = (0..3)
        .map(|i| {
            let band = GainBand::new(base.f_p + df[i], Some(f_r));
            image_dip_frequency(&at(i, 1).1, &band, 60e6).unwrap()
        })
        .collect();
    // Idler image of the resonator: 2 f_p - f_r moves with the pump.
    for (i, d) in dips.iter().enumerate() {
        let oracle = 2.0 * (base.f_p + df[i]) - f_r;
        assert!((d - oracle).abs() <= 30e6, "{d} vs {oracle}");
    }
    assert!(dips[0] < dips[1] && dips[1] < dips[2], "{dips:?}");

    for i in 0..3 {
        let band = GainBand::new(base.f_p + df[i], Some(f_r));
        let g = &at(i, 1).1;
        for k in band_frequencies(g, &band) {
            let v: Vec<f64> = (0..3).map(|j| at(i, j).1.gain_db[k]).collect();
            assert!(v[0] <= v[1] && v[1] <= v[2], "df={} {} Hz: {v:?}", df[i], g.grid[k]);
        }
    }
}

#[test]
fn sweep_records_failures_without_aborting() {
    let spec = DeviceSpec::uniform(40);
    let grid = FrequencyGrid::linspace_step(6.0e9, 7.0e9, 250e6).unwrap();
    // +40 dB drives the junctions past the phase limit.
    let pts = sweep(&spec, PumpDrive::default(), &[0.0], &[40.0, 0.0], &grid, &SolverOptions::default(), &GainOptions::default());
    assert_eq!(pts.len(), 2);
    assert_eq!(pts[0].dp, 40.0);
    assert!(pts[0].outcome.is_err());
    assert!(pts[1].outcome.is_ok());
}

#[test]
fn error_conditions() {
    let spec = DeviceSpec::uniform(20);
    let opts = SolverOptions::default();
    let over = solve_pump(&spec, PumpDrive { p_dbm: -30.0, ..Default::default() }, &opts).unwrap_err();
    assert!(matches!(over, Error::Overdrive { .. } | Error::Divergence { .. }), "{over}");
    let above = solve_pump(&spec, PumpDrive { f_p: 100e9, ..Default::default() }, &opts).unwrap_err();
    assert!(matches!(above, Error::InvalidParameter { name: "f_p", .. }), "{above}");
    assert!(solve_pump(&spec, PumpDrive { n_harmonics: 0, ..Default::default() }, &opts).is_err());
    assert!(solve_pump(&spec, PumpDrive::default(), &SolverOptions { tol: 0.0, ..opts }).is_err());

    let sol = solve_pump(&spec, PumpDrive::default(), &opts).unwrap();
    let grid = FrequencyGrid::new(vec![7.0e9, 7.5e9, 8.0e9, 15.0e9]).unwrap();
    let g = conversion_gain(&sol, &spec, &grid, &GainOptions::default()).unwrap();
    assert_eq!(g.skipped, vec![7.5e9, 15.0e9]);
    assert_eq!(g.grid.points(), &[7.0e9, 8.0e9]);
    assert!(matches!(SidebandGrid::new(7.5e9, 7.5e9, 1), Err(Error::PumpCollision { .. })));
    assert!(PumpedLadder::new(&sol, &DeviceSpec::uniform(21), 1).is_err());
    assert!(PumpedLadder::new(&sol, &spec, 0).is_err());
}

#[test]
fn sideband_grid_layout() {
    let sb = SidebandGrid::new(6.0e9, 7.5e9, 2).unwrap();
    assert_eq!(sb.frequencies, vec![-24e9, -9e9, 6e9, 21e9, 36e9]);
    assert_eq!(sb.signal_index(), 2);
    assert_eq!(sb.idler_frequency(), 9e9);
    assert_eq!(sb.folded()[1], (9e9, true));
}

fn best_of<F: FnMut()>(mut f: F) -> Duration {
    (0..3)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

#[test]
fn cost_is_linear_in_cell_count() {
    let time_for = |n: usize| {
        let spec = DeviceSpec::uniform(n);
        let drive = PumpDrive::default();
        let opts = SolverOptions::default();
        let hb = HarmonicBalance::new(&spec, drive, &opts).unwrap();
        let sol = hb.solve(&opts, None).unwrap();
        let x = hb.state_from(&sol, 1.0);
        let pumped = PumpedLadder::new(&sol, &spec, 1).unwrap();
        best_of(|| {
            let r = hb.residual(&x, 1.0);
            hb.jacobian(&x).solve(&r).unwrap();
            for f in [6.0e9, 6.5e9, 7.0e9, 8.0e9] {
                pumped.response(f, 0).unwrap();
            }
        })
    };
    let t1 = time_for(800);
    let t2 = time_for(1600);
    let ratio = t2.as_secs_f64() / t1.as_secs_f64();
    assert!(ratio <= 2.5, "{ratio}");
}
