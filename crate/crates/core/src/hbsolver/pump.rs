//! Large-signal harmonic balance of the pump.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{dbm_to_source_amplitude, PumpDrive, SolverOptions};
use crate::blocktri::BlockTridiagonal;
use crate::device::{line_admittance, DeviceSpec, Ladder, Link};
use crate::error::{Error, Result};
use crate::units::{angular, REDUCED_FLUX_QUANTUM};

/// Converged pump state.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpSolution {
    pub drive: PumpDrive,
    /// Node voltage phasors `[node][k - 1]` at `k f_p`, `v(t) = Re sum V_k e^{jk w t}`.
    pub node_phasors: Vec<Vec<Complex64>>,
    /// Junction-branch phase phasors `[junction][k - 1]`, one per unit cell.
    pub branch_phase_harmonics: Vec<Vec<Complex64>>,
    /// Max KCL residual relative to the source current.
    pub residual_norm: f64,
    /// Newton iterations summed over continuation steps.
    pub iterations: usize,
    /// Continuation steps used.
    pub ramp_steps: usize,
    /// `max_t |phi(t)| / n_eff` per junction.
    pub junction_phase_amplitude: Vec<f64>,
    /// Thevenin amplitude of the pump source in V.
    pub source_amplitude: f64,
}

impl PumpSolution {
    pub fn n_harmonics(&self) -> usize {
        self.drive.n_harmonics
    }

    /// Largest per-junction phase excursion and the unit cell where it occurs.
    pub fn max_junction_phase(&self) -> (usize, f64) {
        self.junction_phase_amplitude
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
    }

    /// Pump transmission `2 V_out / V_s` at harmonic `k`.
    pub fn transmission(&self, k: usize) -> Complex64 {
        let last = self.node_phasors.last().expect("nodes");
        2.0 * last[k - 1] / self.source_amplitude
    }
}

/// The discretized harmonic-balance system of a device under one pump
/// drive. Unknowns are the real and imaginary parts of every node voltage
/// phasor, `x[node] = [Re V_1, Im V_1, ..., Re V_K, Im V_K]`.
#[derive(Debug, Clone)]
pub struct HarmonicBalance {
    ladder: Ladder,
    drive: PumpDrive,
    /// Linear part of the nodal system (ports included).
    linear: BlockTridiagonal<f64>,
    /// Branch-voltage harmonics -> branch-phase time samples.
    to_phase: DMatrix<f64>,
    /// Time samples -> current harmonics.
    project: DMatrix<f64>,
    source_amplitude: f64,
    n_eff: f64,
}

fn complex_block(y: Complex64) -> [[f64; 2]; 2] {
    [[y.re, -y.im], [y.im, y.re]]
}

fn add_harmonic(m: &mut DMatrix<f64>, k: usize, y: Complex64) {
    let b = complex_block(y);
    for r in 0..2 {
        for c in 0..2 {
            m[(2 * k + r, 2 * k + c)] += b[r][c];
        }
    }
}

fn finite(y: Complex64) -> bool {
    y.re.is_finite() && y.im.is_finite()
}

impl HarmonicBalance {
    pub fn new(spec: &DeviceSpec, drive: PumpDrive, opts: &SolverOptions) -> Result<Self> {
        spec.validate()?;
        drive.validate()?;
        opts.validate()?;
        let cutoff = spec.ladder_cutoff()?;
        if drive.f_p >= cutoff {
            return Err(Error::param(
                "f_p",
                format!("pump {} Hz is not below the ladder cutoff {cutoff:.4e} Hz", drive.f_p),
            ));
        }
        let ladder = Ladder::from_spec(spec)?;
        let k_max = drive.n_harmonics;
        let bs = 2 * k_max;
        let n = ladder.n_nodes();
        let w0 = angular(drive.f_p);
        let g_port = Complex64::new(1.0 / spec.z_system, 0.0);
        let cj_branch = spec.junction.c_j / spec.junction.n_series as f64;

        let mut linear = BlockTridiagonal::<f64>::zeros(n, bs);
        for k in 0..k_max {
            let w = (k + 1) as f64 * w0;
            let f = (k + 1) as f64 * drive.f_p;
            for node in 0..n {
                let mut y = ladder.shunt_admittance(node, w);
                if node == 0 || node == n - 1 {
                    y += g_port;
                }
                if !finite(y) {
                    return Err(Error::SingularElement {
                        freq_hz: f,
                        what: format!("shunt admittance at node {node} (pump harmonic {})", k + 1),
                    });
                }
                add_harmonic(&mut linear.diag[node], k, y);
            }
            for (i, link) in ladder.links.iter().enumerate() {
                let (y11, y12) = match *link {
                    Link::Junction { .. } => {
                        let y = Complex64::new(0.0, w * cj_branch);
                        (y, -y)
                    }
                    Link::Line { z0, theta_ref, f_ref } => line_admittance(z0, theta_ref, f_ref, w)
                        .ok_or(Error::SingularElement {
                            freq_hz: f,
                            what: format!("corner line at link {i} is a half-wave multiple"),
                        })?,
                };
                add_harmonic(&mut linear.diag[i], k, y11);
                add_harmonic(&mut linear.diag[i + 1], k, y11);
                add_harmonic(&mut linear.upper[i], k, y12);
                add_harmonic(&mut linear.lower[i], k, y12);
            }
        }

        let m = (opts.oversampling * k_max).next_power_of_two();
        let mut to_phase = DMatrix::zeros(m, bs);
        let mut project = DMatrix::zeros(bs, m);
        for j in 0..m {
            for k in 0..k_max {
                let kk = (k + 1) as f64;
                let theta = 2.0 * PI * kk * j as f64 / m as f64;
                let (s, c) = theta.sin_cos();
                // phi_k = V_k / (j k w Phi0_reduced)
                let gain = 1.0 / (REDUCED_FLUX_QUANTUM * kk * w0);
                to_phase[(j, 2 * k)] = gain * s;
                to_phase[(j, 2 * k + 1)] = gain * c;
                project[(2 * k, j)] = 2.0 * c / m as f64;
                project[(2 * k + 1, j)] = -2.0 * s / m as f64;
            }
        }

        Ok(Self {
            source_amplitude: dbm_to_source_amplitude(drive.p_dbm, spec.z_system)?,
            n_eff: spec.junction.effective_junctions(),
            ladder,
            drive,
            linear,
            to_phase,
            project,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.ladder.n_nodes()
    }

    pub fn block_size(&self) -> usize {
        2 * self.drive.n_harmonics
    }

    pub fn n_samples(&self) -> usize {
        self.to_phase.nrows()
    }

    pub fn ladder(&self) -> &Ladder {
        &self.ladder
    }

    pub fn source_amplitude(&self) -> f64 {
        self.source_amplitude
    }

    /// Current scale `V_s / z_system` used to normalize residuals.
    pub fn current_scale(&self) -> f64 {
        self.source_amplitude / self.ladder.z_system
    }

    pub fn zero_state(&self) -> Vec<DVector<f64>> {
        vec![DVector::zeros(self.block_size()); self.n_nodes()]
    }

    fn branch_voltage(&self, x: &[DVector<f64>], link: usize) -> DVector<f64> {
        &x[link] - &x[link + 1]
    }

    /// Branch-phase samples over one pump period.
    pub fn branch_phase_samples(&self, x: &[DVector<f64>], link: usize) -> DVector<f64> {
        &self.to_phase * self.branch_voltage(x, link)
    }

    /// KCL residual (currents leaving each node minus injected source
    /// current) with the source scaled by `source_scale`.
    pub fn residual(&self, x: &[DVector<f64>], source_scale: f64) -> Vec<DVector<f64>> {
        let mut f = self.linear.mul_vec(x);
        let i_c = self.ladder.junction.i_c;
        for (i, link) in self.ladder.links.iter().enumerate() {
            if let Link::Junction { .. } = link {
                let phi = self.branch_phase_samples(x, i);
                let i_t = phi.map(|p| i_c * (p / self.n_eff).sin());
                let cur = &self.project * i_t;
                f[i] += &cur;
                f[i + 1] -= &cur;
            }
        }
        f[0][0] -= source_scale * self.current_scale();
        f
    }

    /// Analytic Jacobian of [`Self::residual`] with respect to `x`.
    pub fn jacobian(&self, x: &[DVector<f64>]) -> BlockTridiagonal<f64> {
        let mut jac = self.linear.clone();
        let i_c = self.ladder.junction.i_c;
        for (i, link) in self.ladder.links.iter().enumerate() {
            if let Link::Junction { .. } = link {
                let phi = self.branch_phase_samples(x, i);
                let g = phi.map(|p| i_c / self.n_eff * (p / self.n_eff).cos());
                // P diag(g) T
                let mut scaled = self.to_phase.clone();
                for (mut row, gj) in scaled.row_iter_mut().zip(g.iter()) {
                    row *= *gj;
                }
                let block = &self.project * scaled;
                jac.diag[i] += &block;
                jac.diag[i + 1] += &block;
                jac.upper[i] -= &block;
                jac.lower[i] -= &block;
            }
        }
        jac
    }

    fn residual_norm(&self, f: &[DVector<f64>], source_scale: f64) -> f64 {
        let worst = f.iter().map(|b| b.amax()).fold(0.0, f64::max);
        worst / (source_scale * self.current_scale())
    }

    /// Newton iteration at a fixed source scale; returns (iterations, residual).
    fn newton(
        &self,
        x: &mut Vec<DVector<f64>>,
        source_scale: f64,
        opts: &SolverOptions,
        step: usize,
    ) -> Result<(usize, f64)> {
        let mut f = self.residual(x, source_scale);
        let mut r = self.residual_norm(&f, source_scale);
        let mut iters = 0;
        while !(r <= opts.tol) {
            if iters >= opts.max_iter || !r.is_finite() {
                return Err(Error::Divergence {
                    step,
                    iterations: iters,
                    residual: r,
                });
            }
            let neg: Vec<DVector<f64>> = f.iter().map(|b| -b).collect();
            let dx = self.jacobian(x).solve(&neg).ok_or(Error::Divergence {
                step,
                iterations: iters,
                residual: r,
            })?;
            let mut lambda = 1.0;
            let mut trial;
            let mut f_trial;
            let mut r_trial;
            let mut halvings = 0;
            loop {
                trial = x.iter().zip(&dx).map(|(a, d)| a + d * lambda).collect::<Vec<_>>();
                f_trial = self.residual(&trial, source_scale);
                r_trial = self.residual_norm(&f_trial, source_scale);
                if r_trial < r || halvings >= opts.max_halvings {
                    break;
                }
                lambda *= 0.5;
                halvings += 1;
            }
            *x = trial;
            f = f_trial;
            r = r_trial;
            iters += 1;
        }
        Ok((iters, r))
    }

    /// Full continuation solve, optionally from an initial state already
    /// at the target amplitude.
    pub fn solve(&self, opts: &SolverOptions, initial: Option<Vec<DVector<f64>>>) -> Result<PumpSolution> {
        if let Some(mut x) = initial {
            if x.len() == self.n_nodes() && x.iter().all(|b| b.len() == self.block_size()) {
                if let Ok((iters, r)) = self.newton(&mut x, 1.0, opts, 1) {
                    return self.finish(x, r, iters, 1);
                }
            }
        }
        let mut x = self.zero_state();
        let mut total = 0;
        let mut r = f64::INFINITY;
        for step in 1..=opts.n_steps {
            let scale = 0.5f64.powi((opts.n_steps - step) as i32);
            if step > 1 {
                // Warm start: rescale the previous step's state.
                for b in x.iter_mut() {
                    *b *= 2.0;
                }
            }
            let (iters, res) = self.newton(&mut x, scale, opts, step)?;
            total += iters;
            r = res;
        }
        self.finish(x, r, total, opts.n_steps)
    }

    fn finish(&self, x: Vec<DVector<f64>>, residual: f64, iterations: usize, steps: usize) -> Result<PumpSolution> {
        let k_max = self.drive.n_harmonics;
        let w0 = angular(self.drive.f_p);
        let to_complex = |b: &DVector<f64>| -> Vec<Complex64> {
            (0..k_max).map(|k| Complex64::new(b[2 * k], b[2 * k + 1])).collect()
        };
        let mut phase_h = Vec::new();
        let mut amp = Vec::new();
        let mut cells = Vec::new();
        for (i, link) in self.ladder.links.iter().enumerate() {
            if let Link::Junction { cell } = *link {
                let v = self.branch_voltage(&x, i);
                phase_h.push(
                    (0..k_max)
                        .map(|k| {
                            let vk = Complex64::new(v[2 * k], v[2 * k + 1]);
                            vk / Complex64::new(0.0, REDUCED_FLUX_QUANTUM * (k + 1) as f64 * w0)
                        })
                        .collect::<Vec<_>>(),
                );
                let peak = self.branch_phase_samples(&x, i).amax() / self.n_eff;
                amp.push(peak);
                cells.push(cell);
            }
        }
        if let Some((j, &peak)) = amp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            if peak >= PI / 2.0 {
                return Err(Error::Overdrive {
                    cell: cells[j],
                    phase: peak,
                });
            }
        }
        Ok(PumpSolution {
            drive: self.drive,
            node_phasors: x.iter().map(to_complex).collect(),
            branch_phase_harmonics: phase_h,
            residual_norm: residual,
            iterations,
            ramp_steps: steps,
            junction_phase_amplitude: amp,
            source_amplitude: self.source_amplitude,
        })
    }

    /// Packs a solution's node phasors back into solver state.
    pub fn state_from(&self, sol: &PumpSolution, amplitude_ratio: f64) -> Vec<DVector<f64>> {
        sol.node_phasors
            .iter()
            .map(|v| {
                DVector::from_iterator(
                    self.block_size(),
                    (0..self.drive.n_harmonics).flat_map(|k| {
                        let c = v.get(k).copied().unwrap_or_default() * amplitude_ratio;
                        [c.re, c.im]
                    }),
                )
            })
            .collect()
    }
}

/// Solves the pump by Newton continuation from zero.
pub fn solve_pump(spec: &DeviceSpec, drive: PumpDrive, opts: &SolverOptions) -> Result<PumpSolution> {
    HarmonicBalance::new(spec, drive, opts)?.solve(opts, None)
}

/// Like [`solve_pump`], first trying a direct Newton solve from `warm`
/// (rescaled to the new drive amplitude) and falling back to continuation.
pub fn solve_pump_warm(
    spec: &DeviceSpec,
    drive: PumpDrive,
    opts: &SolverOptions,
    warm: Option<&PumpSolution>,
) -> Result<PumpSolution> {
    let hb = HarmonicBalance::new(spec, drive, opts)?;
    let init = warm
        .filter(|w| w.node_phasors.len() == hb.n_nodes() && w.drive.f_p == drive.f_p)
        .map(|w| hb.state_from(w, hb.source_amplitude() / w.source_amplitude));
    match hb.solve(opts, init) {
        Ok(s) => Ok(s),
        Err(_) if warm.is_some() => hb.solve(opts, None),
        Err(e) => Err(e),
    }
}
