//! Multiport scattering data and the operations that act on it directly.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Multiport scattering parameters on a frequency grid.
///
/// Ports are indexed from zero in this API.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    grid: FrequencyGrid,
    n_ports: usize,
    s: Vec<DMatrix<Complex64>>,
    z_ref: Vec<f64>,
}

/// Load applied to a port that is being eliminated by [`Network::reduce_ports`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Open,
    Short,
    Match,
    Reflection(Complex64),
}

impl Termination {
    pub fn gamma(self) -> Complex64 {
        match self {
            Termination::Open => Complex64::new(1.0, 0.0),
            Termination::Short => Complex64::new(-1.0, 0.0),
            Termination::Match => Complex64::new(0.0, 0.0),
            Termination::Reflection(g) => g,
        }
    }
}

impl Network {
    pub fn new(grid: FrequencyGrid, s: Vec<DMatrix<Complex64>>, z_ref: Vec<f64>) -> Result<Self> {
        let n_ports = z_ref.len();
        if n_ports == 0 {
            return Err(Error::param("n_ports", "network needs at least one port"));
        }
        if s.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(z) = z_ref.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(Error::param("z_ref", format!("must be > 0, got {z}")));
        }
        if let Some((i, _)) = s
            .iter()
            .enumerate()
            .find(|(_, m)| m.nrows() != n_ports || m.ncols() != n_ports)
        {
            return Err(Error::param(
                "s",
                format!("matrix at point {i} is not {n_ports}x{n_ports}"),
            ));
        }
        Ok(Self {
            grid,
            n_ports,
            s,
            z_ref,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn s(&self) -> &[DMatrix<Complex64>] {
        &self.s
    }

    pub fn z_ref(&self) -> &[f64] {
        &self.z_ref
    }

    /// Closes the given ports with linear loads and returns the network
    /// seen at the remaining ports (in ascending port order).
    pub fn reduce_ports(&self, terminations: &BTreeMap<usize, Termination>) -> Result<Network> {
        let ports: Vec<usize> = terminations.keys().copied().collect();
        self.reduce_ports_with(&ports, |p, _| Ok(terminations[&p].gamma()))
    }

    /// Like [`Self::reduce_ports`] with a frequency-dependent reflection
    /// `gamma(port, freq_hz)` (referenced to that port's `z_ref`).
    pub fn reduce_ports_with<F>(&self, ports: &[usize], gamma: F) -> Result<Network>
    where
        F: Fn(usize, f64) -> Result<Complex64>,
    {
        if ports.is_empty() {
            return Ok(self.clone());
        }
        if let Some(&p) = ports.iter().find(|&&p| p >= self.n_ports) {
            return Err(Error::PortOutOfRange {
                port: p,
                n_ports: self.n_ports,
            });
        }
        let mut term = ports.to_vec();
        term.sort_unstable();
        term.dedup();
        let kept: Vec<usize> = (0..self.n_ports).filter(|p| term.binary_search(p).is_err()).collect();
        if kept.is_empty() {
            return Err(Error::param("terminations", "at least one port must remain"));
        }
        let (nk, nt) = (kept.len(), term.len());

        let mut out = Vec::with_capacity(self.s.len());
        for (s, f) in self.s.iter().zip(self.grid.iter()) {
            let gammas = term.iter().map(|&p| gamma(p, f)).collect::<Result<Vec<_>>>()?;
            let skk = DMatrix::from_fn(nk, nk, |r, c| s[(kept[r], kept[c])]);
            let skt = DMatrix::from_fn(nk, nt, |r, c| s[(kept[r], term[c])]);
            let stk = DMatrix::from_fn(nt, nk, |r, c| s[(term[r], kept[c])]);
            // a_t = G b_t  =>  b_t = (I - S_tt G)^-1 S_tk a_k
            let m = DMatrix::from_fn(nt, nt, |r, c| {
                let delta = if r == c { 1.0 } else { 0.0 };
                Complex64::new(delta, 0.0) - s[(term[r], term[c])] * gammas[c]
            });
            let x = m
                .lu()
                .solve(&stk)
                .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
                .ok_or(Error::IllConditionedTermination { freq_hz: f })?;
            let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gammas));
            out.push(skk + skt * g * x);
        }
        Network::new(
            self.grid.clone(),
            out,
            kept.iter().map(|&p| self.z_ref[p]).collect(),
        )
    }

    /// Re-expresses the same physical network at new real per-port reference
    /// impedances.
    pub fn renormalize(&self, z_new: &[f64]) -> Result<Network> {
        if z_new.len() != self.n_ports {
            return Err(Error::param(
                "z_new",
                format!("need {} impedances, got {}", self.n_ports, z_new.len()),
            ));
        }
        if let Some(z) = z_new.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(Error::param("z_new", format!("must be > 0, got {z}")));
        }
        if z_new == self.z_ref.as_slice() {
            return Ok(self.clone());
        }
        // a' = P a + Q b, b' = Q a + P b with rho = sqrt(z_old / z_new)
        let n = self.n_ports;
        let (p, q): (Vec<f64>, Vec<f64>) = self
            .z_ref
            .iter()
            .zip(z_new)
            .map(|(zo, zn)| {
                let rho = (zo / zn).sqrt();
                (0.5 * (rho + 1.0 / rho), 0.5 * (rho - 1.0 / rho))
            })
            .unzip();
        let mut out = Vec::with_capacity(self.s.len());
        for (s, f) in self.s.iter().zip(self.grid.iter()) {
            let num = DMatrix::from_fn(n, n, |r, c| {
                let d = if r == c { q[r] } else { 0.0 };
                Complex64::new(d, 0.0) + s[(r, c)] * p[r]
            });
            let den = DMatrix::from_fn(n, n, |r, c| {
                let d = if r == c { p[r] } else { 0.0 };
                Complex64::new(d, 0.0) + s[(r, c)] * q[r]
            });
            let inv = den.try_inverse().ok_or(Error::Singular {
                freq_hz: f,
                what: "renormalization matrix is singular".into(),
            })?;
            out.push(num * inv);
        }
        Network::new(self.grid.clone(), out, z_new.to_vec())
    }

    /// Linear interpolation of real and imaginary parts onto `target`.
    pub fn interpolate(&self, target: &FrequencyGrid) -> Result<Network> {
        if target == &self.grid {
            return Ok(self.clone());
        }
        let src = self.grid.points();
        let (lo, hi) = (self.grid.first(), self.grid.last());
        let mut out = Vec::with_capacity(target.len());
        for f in target.iter() {
            if f < lo || f > hi {
                return Err(Error::Extrapolation {
                    freq_hz: f,
                    lo_hz: lo,
                    hi_hz: hi,
                });
            }
            // first index with src[i] >= f
            let i = src.partition_point(|&x| x < f);
            if src[i] == f {
                out.push(self.s[i].clone());
                continue;
            }
            let (f0, f1) = (src[i - 1], src[i]);
            let t = (f - f0) / (f1 - f0);
            out.push(&self.s[i - 1] * Complex64::new(1.0 - t, 0.0) + &self.s[i] * Complex64::new(t, 0.0));
        }
        Network::new(target.clone(), out, self.z_ref.clone())
    }

    /// Largest |S - S^T| entry over the grid.
    pub fn reciprocity_error(&self) -> f64 {
        self.s
            .iter()
            .map(|m| (m - m.transpose()).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Largest |S^H S - I| entry over the grid.
    pub fn unitarity_error(&self) -> f64 {
        let id = DMatrix::<Complex64>::identity(self.n_ports, self.n_ports);
        self.s
            .iter()
            .map(|m| (m.adjoint() * m - &id).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_port(f: &[f64], s21: &[f64]) -> Network {
        let grid = FrequencyGrid::new(f.to_vec()).unwrap();
        let s = s21
            .iter()
            .map(|&t| DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(t, 0.0), c(t, 0.0), c(0.0, 0.0)]))
            .collect();
        Network::new(grid, s, vec![50.0, 50.0]).unwrap()
    }

    #[test]
    fn rejects_bad_reference() {
        let g = FrequencyGrid::single(1e9).unwrap();
        assert!(Network::new(g.clone(), vec![DMatrix::zeros(1, 1)], vec![0.0]).is_err());
        assert!(Network::new(g, vec![DMatrix::zeros(2, 2)], vec![50.0]).is_err());
    }

    #[test]
    fn interpolation_midpoint_and_exact_points() {
        let n = two_port(&[1e9, 2e9], &[0.2, 0.4]);
        let mid = n.interpolate(&FrequencyGrid::single(1.5e9).unwrap()).unwrap();
        assert!((mid.s()[0][(1, 0)] - c(0.3, 0.0)).norm() < 1e-15);
        let same = n.interpolate(n.grid()).unwrap();
        assert_eq!(same, n);
        let ends = n.interpolate(&FrequencyGrid::new(vec![1e9, 2e9]).unwrap()).unwrap();
        assert_eq!(ends.s(), n.s());
    }

    #[test]
    fn interpolation_refuses_extrapolation() {
        let n = two_port(&[1e9, 2e9], &[0.2, 0.4]);
        let err = n.interpolate(&FrequencyGrid::single(2.5e9).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Extrapolation { freq_hz, .. } if freq_hz == 2.5e9));
    }

    #[test]
    fn empty_termination_is_identity() {
        let n = two_port(&[1e9], &[0.5]);
        assert_eq!(n.reduce_ports(&BTreeMap::new()).unwrap(), n);
    }

    #[test]
    fn matched_junction_arm_equals_shunt_load() {
        // Ideal T junction of three Z0 lines, S = 1/3 [[-1,2,2],[2,-1,2],[2,2,-1]].
        // A matched third arm is a shunt Z0 across a Z0 line: S11 = -1/3, S21 = 2/3.
        let g = FrequencyGrid::single(1e9).unwrap();
        let (d, o) = (c(-1.0 / 3.0, 0.0), c(2.0 / 3.0, 0.0));
        let s = DMatrix::from_row_slice(3, 3, &[d, o, o, o, d, o, o, o, d]);
        let n = Network::new(g, vec![s], vec![50.0; 3]).unwrap();
        let mut t = BTreeMap::new();
        t.insert(2, Termination::Match);
        let r = n.reduce_ports(&t).unwrap();
        assert_eq!(r.n_ports(), 2);
        assert!((r.s()[0][(0, 0)] - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((r.s()[0][(1, 0)] - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(r.reciprocity_error() < 1e-15);
    }

    #[test]
    fn shorting_a_through_arm_is_singular_when_loop_closes() {
        // Port 2 of a 2-port "mirror" S = [[0,1],[1,0]] closed by an open
        // reflects back into port 1 with no loss: |S11| = 1, finite.
        let n = two_port(&[1e9], &[1.0]);
        let mut t = BTreeMap::new();
        t.insert(1, Termination::Open);
        let r = n.reduce_ports(&t).unwrap();
        assert!((r.s()[0][(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);

        // S22 = 1 with an open termination gives I - S22 * G = 0.
        let g = FrequencyGrid::single(1e9).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let n = Network::new(g, vec![s], vec![50.0; 2]).unwrap();
        assert!(matches!(
            n.reduce_ports(&t),
            Err(Error::IllConditionedTermination { .. })
        ));
    }

    #[test]
    fn port_range_checked() {
        let n = two_port(&[1e9], &[0.5]);
        let mut t = BTreeMap::new();
        t.insert(5, Termination::Short);
        assert!(matches!(n.reduce_ports(&t), Err(Error::PortOutOfRange { port: 5, .. })));
        let mut all = BTreeMap::new();
        all.insert(0, Termination::Short);
        all.insert(1, Termination::Short);
        assert!(n.reduce_ports(&all).is_err());
    }

    #[test]
    fn renormalize_through_stays_through() {
        let n = two_port(&[1e9], &[1.0]);
        let r = n.renormalize(&[25.0, 25.0]).unwrap();
        assert!(r.s()[0][(0, 0)].norm() < 1e-15);
        assert!((r.s()[0][(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert_eq!(n.renormalize(&[50.0, 50.0]).unwrap(), n);
    }
}
