//! Pump frequency / power maps.

use rayon::prelude::*;

use super::pump::{solve_pump_warm, PumpSolution};
use super::sideband::{conversion_gain, GainOptions, GainSpectrum};
use super::{PumpDrive, SolverOptions};
use crate::device::DeviceSpec;
use crate::error::Result;
use crate::grid::FrequencyGrid;

/// One operating point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    /// Pump frequency offset in Hz.
    pub df: f64,
    /// Pump power offset in dB.
    pub dp: f64,
    pub drive: PumpDrive,
    pub outcome: Result<(PumpSolution, GainSpectrum)>,
}

/// Solves every `(df, dp)` pair, frequency columns in parallel. Within one
/// column the powers are visited in ascending order, each pump solve
/// warm-started from the last converged neighbour. Failures are recorded
/// per point. Results are ordered by `df_list`, then `dp_list`.
pub fn sweep(
    spec: &DeviceSpec,
    base: PumpDrive,
    df_list: &[f64],
    dp_list: &[f64],
    grid: &FrequencyGrid,
    solver: &SolverOptions,
    gain: &GainOptions,
) -> Vec<SweepPoint> {
    let mut order: Vec<usize> = (0..dp_list.len()).collect();
    order.sort_by(|&a, &b| dp_list[a].total_cmp(&dp_list[b]));
    let columns: Vec<Vec<SweepPoint>> = df_list
        .par_iter()
        .map(|&df| {
            let mut column: Vec<Option<SweepPoint>> = vec![None; dp_list.len()];
            let mut warm: Option<PumpSolution> = None;
            for &j in &order {
                let dp = dp_list[j];
                let drive = PumpDrive {
                    f_p: base.f_p + df,
                    p_dbm: base.p_dbm + dp,
                    ..base
                };
                let outcome = solve_pump_warm(spec, drive, solver, warm.as_ref()).and_then(|sol| {
                    let g = conversion_gain(&sol, spec, grid, gain)?;
                    Ok((sol, g))
                });
                match &outcome {
                    Ok((sol, _)) => warm = Some(sol.clone()),
                    Err(e) => log::warn!("sweep point df={df} Hz dp={dp} dB failed: {e}"),
                }
                column[j] = Some(SweepPoint { df, dp, drive, outcome });
            }
            column.into_iter().flatten().collect()
        })
        .collect();
    columns.into_iter().flatten().collect()
}
