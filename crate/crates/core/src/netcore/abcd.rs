//! Chain (ABCD) two-ports and their conversion to scattering parameters.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use super::network::Network;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Two-port chain matrix sampled on a frequency grid.
///
/// Entries are `[[A, B], [C, D]]` with `B` in ohms and `C` in siemens.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcdTwoPort {
    grid: FrequencyGrid,
    abcd: Vec<Matrix2<Complex64>>,
}

impl AbcdTwoPort {
    pub fn new(grid: FrequencyGrid, abcd: Vec<Matrix2<Complex64>>) -> Result<Self> {
        if abcd.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, abcd })
    }

    /// Ideal through.
    pub fn identity(grid: &FrequencyGrid) -> Self {
        Self {
            grid: grid.clone(),
            abcd: vec![Matrix2::identity(); grid.len()],
        }
    }

    /// Builds a two-port from a fallible per-frequency generator.
    pub fn try_from_fn<F>(grid: &FrequencyGrid, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<Matrix2<Complex64>>,
    {
        let abcd = grid.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: grid.clone(),
            abcd,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[Matrix2<Complex64>] {
        &self.abcd
    }

    pub fn at(&self, i: usize) -> &Matrix2<Complex64> {
        &self.abcd[i]
    }

    pub fn determinants(&self) -> Vec<Complex64> {
        self.abcd.iter().map(|m| m.determinant()).collect()
    }

    /// Signal flows through `self` first, then `next`.
    pub fn cascade(&self, next: &AbcdTwoPort) -> Result<AbcdTwoPort> {
        cascade(self, next)
    }
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Series impedance element: `[[1, z], [0, 1]]`.
pub fn series_two_port(grid: &FrequencyGrid, z: impl Fn(f64) -> Complex64) -> Result<AbcdTwoPort> {
    AbcdTwoPort::try_from_fn(grid, |f| {
        let zf = z(f);
        if !finite(zf) {
            return Err(Error::SingularElement {
                freq_hz: f,
                what: "series impedance is not finite".into(),
            });
        }
        Ok(series_matrix(zf))
    })
}

/// Shunt admittance element: `[[1, 0], [y, 1]]`.
pub fn shunt_two_port(grid: &FrequencyGrid, y: impl Fn(f64) -> Complex64) -> Result<AbcdTwoPort> {
    AbcdTwoPort::try_from_fn(grid, |f| {
        let yf = y(f);
        if !finite(yf) {
            return Err(Error::SingularElement {
                freq_hz: f,
                what: "shunt admittance is not finite".into(),
            });
        }
        Ok(shunt_matrix(yf))
    })
}

pub fn series_matrix(z: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(ONE, z, ZERO, ONE)
}

pub fn shunt_matrix(y: Complex64) -> Matrix2<Complex64> {
    Matrix2::new(ONE, ZERO, y, ONE)
}

/// Lossless line of characteristic impedance `z0` with electrical length
/// `theta` radians.
pub fn line_matrix(z0: f64, theta: f64) -> Matrix2<Complex64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(
        Complex64::new(c, 0.0),
        Complex64::new(0.0, z0 * s),
        Complex64::new(0.0, s / z0),
        Complex64::new(c, 0.0),
    )
}

/// Ideal line whose electrical length scales linearly with frequency and
/// equals `theta_ref` at `f_ref`.
pub fn transmission_line(grid: &FrequencyGrid, z0: f64, theta_ref: f64, f_ref: f64) -> AbcdTwoPort {
    AbcdTwoPort {
        grid: grid.clone(),
        abcd: grid
            .iter()
            .map(|f| line_matrix(z0, theta_ref * f / f_ref))
            .collect(),
    }
}

pub fn cascade(a: &AbcdTwoPort, b: &AbcdTwoPort) -> Result<AbcdTwoPort> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    Ok(AbcdTwoPort {
        grid: a.grid.clone(),
        abcd: a.abcd.iter().zip(&b.abcd).map(|(x, y)| x * y).collect(),
    })
}

/// Scattering matrix of one chain matrix at reference `z0` (both ports).
pub fn abcd_matrix_to_s(m: &Matrix2<Complex64>, z0: f64, freq_hz: f64) -> Result<Matrix2<Complex64>> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let b_n = b / z0;
    let c_n = c * z0;
    let den = a + b_n + c_n + d;
    if den.norm() == 0.0 || !finite(den) {
        return Err(Error::Singular {
            freq_hz,
            what: "ABCD to S denominator vanishes".into(),
        });
    }
    let det = a * d - b * c;
    Ok(Matrix2::new(
        (a + b_n - c_n - d) / den,
        2.0 * det / den,
        Complex64::new(2.0, 0.0) / den,
        (-a + b_n - c_n + d) / den,
    ))
}

/// Chain matrix of a two-port scattering matrix at reference `z0`.
pub fn s_matrix_to_abcd(s: &Matrix2<Complex64>, z0: f64, freq_hz: f64) -> Result<Matrix2<Complex64>> {
    let (s11, s12, s21, s22) = (s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
    let den = 2.0 * s21;
    if den.norm() == 0.0 {
        return Err(Error::Singular {
            freq_hz,
            what: "S21 vanishes, no chain representation".into(),
        });
    }
    let p = s12 * s21;
    Ok(Matrix2::new(
        ((ONE + s11) * (ONE - s22) + p) / den,
        z0 * ((ONE + s11) * (ONE + s22) - p) / den,
        ((ONE - s11) * (ONE - s22) - p) / (den * z0),
        ((ONE - s11) * (ONE + s22) + p) / den,
    ))
}

pub fn abcd_to_s(a: &AbcdTwoPort, z_ref: f64) -> Result<Network> {
    if !(z_ref > 0.0 && z_ref.is_finite()) {
        return Err(Error::param("z_ref", format!("must be > 0, got {z_ref}")));
    }
    let s = a
        .abcd
        .iter()
        .zip(a.grid.iter())
        .map(|(m, f)| {
            let s = abcd_matrix_to_s(m, z_ref, f)?;
            Ok(DMatrix::from_fn(2, 2, |r, c| s[(r, c)]))
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(a.grid.clone(), s, vec![z_ref; 2])
}

/// Converts a 2-port network to chain form. Networks with unequal port
/// references are first renormalized to the port-1 reference.
pub fn s_to_abcd(n: &Network) -> Result<AbcdTwoPort> {
    if n.n_ports() != 2 {
        return Err(Error::param(
            "n_ports",
            format!("chain form needs a 2-port, got {}", n.n_ports()),
        ));
    }
    let z0 = n.z_ref()[0];
    let renorm;
    let net = if n.z_ref()[1] != z0 {
        renorm = n.renormalize(&[z0, z0])?;
        &renorm
    } else {
        n
    };
    let abcd = net
        .s()
        .iter()
        .zip(net.grid().iter())
        .map(|(s, f)| {
            let s2 = Matrix2::new(s[(0, 0)], s[(0, 1)], s[(1, 0)], s[(1, 1)]);
            s_matrix_to_abcd(&s2, z0, f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AbcdTwoPort {
        grid: net.grid().clone(),
        abcd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_series_and_shunt_are_throughs() {
        let g = FrequencyGrid::linspace(1e9, 2e9, 3).unwrap();
        let id = AbcdTwoPort::identity(&g);
        assert_eq!(series_two_port(&g, |_| c(0.0, 0.0)).unwrap(), id);
        assert_eq!(shunt_two_port(&g, |_| c(0.0, 0.0)).unwrap(), id);
    }

    #[test]
    fn series_inductor_reactance() {
        // 2*pi*7.5e9*184.2e-12 = 8.680 ohm
        let g = FrequencyGrid::single(7.5e9).unwrap();
        let t = series_two_port(&g, |f| c(0.0, 2.0 * PI * f * 184.2e-12)).unwrap();
        let m = t.at(0);
        assert!((m[(0, 1)].im - 8.680).abs() < 1e-3);
        assert_eq!(m[(0, 0)], c(1.0, 0.0));
        assert_eq!(m[(1, 0)], c(0.0, 0.0));
    }

    #[test]
    fn series_capacitor_reactance() {
        let g = FrequencyGrid::single(1e9).unwrap();
        let t = series_two_port(&g, |f| 1.0 / c(0.0, 2.0 * PI * f * 1e-12)).unwrap();
        assert!((t.at(0)[(0, 1)].im + 159.155).abs() < 1e-3);
    }

    #[test]
    fn shunt_capacitor_susceptance() {
        let g = FrequencyGrid::single(7.5e9).unwrap();
        let t = shunt_two_port(&g, |f| c(0.0, 2.0 * PI * f * 73.7e-15)).unwrap();
        assert!((t.at(0)[(1, 0)].im - 3.473e-3).abs() < 1e-6);
    }

    #[test]
    fn non_finite_shunt_names_frequency() {
        let g = FrequencyGrid::new(vec![1e9, 2e9]).unwrap();
        let err = shunt_two_port(&g, |f| if f > 1.5e9 { c(f64::INFINITY, 0.0) } else { c(0.0, 0.0) })
            .unwrap_err();
        assert_eq!(
            err,
            Error::SingularElement {
                freq_hz: 2e9,
                what: "shunt admittance is not finite".into()
            }
        );
    }

    #[test]
    fn cascading_series_adds_impedance() {
        let g = FrequencyGrid::linspace(1e9, 5e9, 5).unwrap();
        let a = series_two_port(&g, |f| c(3.0, f * 1e-9)).unwrap();
        let b = series_two_port(&g, |f| c(1.0, -2.0 * f * 1e-9)).unwrap();
        let ab = cascade(&a, &b).unwrap();
        let direct = series_two_port(&g, |f| c(4.0, -f * 1e-9)).unwrap();
        for (x, y) in ab.matrices().iter().zip(direct.matrices()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = AbcdTwoPort::identity(&FrequencyGrid::single(1e9).unwrap());
        let b = AbcdTwoPort::identity(&FrequencyGrid::single(2e9).unwrap());
        assert_eq!(cascade(&a, &b).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn known_s_parameters() {
        let g = FrequencyGrid::single(1e9).unwrap();
        let s = abcd_to_s(&AbcdTwoPort::identity(&g), 50.0).unwrap();
        assert!((s.s()[0][(0, 0)]).norm() < 1e-15);
        assert!((s.s()[0][(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);

        let series = abcd_to_s(&series_two_port(&g, |_| c(50.0, 0.0)).unwrap(), 50.0).unwrap();
        assert!((series.s()[0][(0, 0)] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((series.s()[0][(1, 0)] - c(2.0 / 3.0, 0.0)).norm() < 1e-15);

        let shunt = abcd_to_s(&shunt_two_port(&g, |_| c(1.0 / 50.0, 0.0)).unwrap(), 50.0).unwrap();
        assert!((shunt.s()[0][(0, 0)] - c(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((shunt.s()[0][(1, 0)] - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn open_shunt_has_no_chain_form() {
        // A short to ground blocks transmission entirely.
        let s = Matrix2::new(c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0));
        assert!(matches!(s_matrix_to_abcd(&s, 50.0, 3e9), Err(Error::Singular { freq_hz, .. }) if freq_hz == 3e9));
    }

    #[test]
    fn line_of_zero_length_is_identity() {
        assert_eq!(line_matrix(50.0, 0.0), Matrix2::identity());
        let m = line_matrix(40.0, 0.7);
        assert!((m.determinant() - c(1.0, 0.0)).norm() < 1e-14);
    }
}
