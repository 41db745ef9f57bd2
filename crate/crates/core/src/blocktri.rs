//! Block-tridiagonal linear systems, solved by block LU (block Thomas)
//! elimination in O(n) blocks.
//!
//! Both the harmonic-balance Newton systems (real blocks) and the sideband
//! systems (complex blocks) of a ladder couple only neighbouring nodes.

use nalgebra::{ComplexField, DMatrix, DVector};

/// `A[i][i] = diag[i]`, `A[i+1][i] = lower[i]`, `A[i][i+1] = upper[i]`.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal<T: ComplexField> {
    pub diag: Vec<DMatrix<T>>,
    pub lower: Vec<DMatrix<T>>,
    pub upper: Vec<DMatrix<T>>,
}

/// Relative pivot size below which a block is declared singular.
const PIVOT_EPS: f64 = 1e-13;

impl<T: ComplexField<RealField = f64> + Copy> BlockTridiagonal<T> {
    /// Zero system with `n` blocks of size `b`.
    pub fn zeros(n: usize, b: usize) -> Self {
        Self {
            diag: vec![DMatrix::zeros(b, b); n],
            lower: vec![DMatrix::zeros(b, b); n.saturating_sub(1)],
            upper: vec![DMatrix::zeros(b, b); n.saturating_sub(1)],
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |d| d.nrows())
    }

    /// Solves `A x = rhs`; `None` when a pivot block is (numerically) singular.
    pub fn solve(&self, rhs: &[DVector<T>]) -> Option<Vec<DVector<T>>> {
        let n = self.n_blocks();
        assert_eq!(rhs.len(), n, "rhs block count");
        if n == 0 {
            return Some(Vec::new());
        }
        let mut w: Vec<DMatrix<T>> = Vec::with_capacity(n.saturating_sub(1));
        let mut v: Vec<DVector<T>> = Vec::with_capacity(n);
        let mut schur = self.diag[0].clone();
        let mut y = rhs[0].clone();
        for i in 0..n {
            let lu = schur.clone().lu();
            if !pivots_ok(&lu.u()) {
                return None;
            }
            let vi = lu.solve(&y)?;
            if i + 1 < n {
                let wi = lu.solve(&self.upper[i])?;
                schur = &self.diag[i + 1] - &self.lower[i] * &wi;
                y = &rhs[i + 1] - &self.lower[i] * &vi;
                w.push(wi);
            }
            v.push(vi);
        }
        let mut x = v;
        for i in (0..n.saturating_sub(1)).rev() {
            let next = x[i + 1].clone();
            x[i] -= &w[i] * next;
        }
        if x.iter().all(|b| b.iter().all(|e| e.is_finite())) {
            Some(x)
        } else {
            None
        }
    }

    pub fn mul_vec(&self, x: &[DVector<T>]) -> Vec<DVector<T>> {
        let n = self.n_blocks();
        (0..n)
            .map(|i| {
                let mut r = &self.diag[i] * &x[i];
                if i > 0 {
                    r += &self.lower[i - 1] * &x[i - 1];
                }
                if i + 1 < n {
                    r += &self.upper[i] * &x[i + 1];
                }
                r
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let (n, b) = (self.n_blocks(), self.block_size());
        let mut m = DMatrix::zeros(n * b, n * b);
        for i in 0..n {
            m.view_mut((i * b, i * b), (b, b)).copy_from(&self.diag[i]);
            if i + 1 < n {
                m.view_mut(((i + 1) * b, i * b), (b, b)).copy_from(&self.lower[i]);
                m.view_mut((i * b, (i + 1) * b), (b, b)).copy_from(&self.upper[i]);
            }
        }
        m
    }
}

fn pivots_ok<T: ComplexField<RealField = f64>>(u: &DMatrix<T>) -> bool {
    let scale = u.iter().map(|e| e.clone().modulus()).fold(0.0, f64::max);
    if !(scale.is_finite() && scale > 0.0) {
        return false;
    }
    (0..u.nrows()).all(|i| u[(i, i)].clone().modulus() > PIVOT_EPS * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_dense_solve_real_and_complex() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let (n, b) = (9, 4);
        let mut a = BlockTridiagonal::<Complex64>::zeros(n, b);
        let rand_c = |rng: &mut rand::rngs::StdRng| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        for i in 0..n {
            a.diag[i] = DMatrix::from_fn(b, b, |r, c| rand_c(&mut rng) + if r == c { Complex64::new(6.0, 0.0) } else { Complex64::new(0.0, 0.0) });
        }
        for i in 0..n - 1 {
            a.lower[i] = DMatrix::from_fn(b, b, |_, _| rand_c(&mut rng));
            a.upper[i] = DMatrix::from_fn(b, b, |_, _| rand_c(&mut rng));
        }
        let rhs: Vec<DVector<Complex64>> = (0..n).map(|_| DVector::from_fn(b, |_, _| rand_c(&mut rng))).collect();
        let x = a.solve(&rhs).unwrap();
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip(&rhs) {
            assert!((u - v).norm() < 1e-12);
        }

        let mut r = BlockTridiagonal::<f64>::zeros(3, 2);
        for i in 0..3 {
            r.diag[i] = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        }
        for i in 0..2 {
            r.lower[i] = DMatrix::identity(2, 2);
            r.upper[i] = DMatrix::identity(2, 2) * 0.5;
        }
        let rhs: Vec<DVector<f64>> = (0..3).map(|i| DVector::from_vec(vec![i as f64, 1.0])).collect();
        let x = r.solve(&rhs).unwrap();
        let flat_x = DVector::from_iterator(6, x.iter().flat_map(|b| b.iter().copied()));
        let flat_b = DVector::from_iterator(6, rhs.iter().flat_map(|b| b.iter().copied()));
        assert!((r.to_dense() * flat_x - flat_b).norm() < 1e-13);
    }

    #[test]
    fn singular_block_detected() {
        let a = BlockTridiagonal::<f64>::zeros(2, 2);
        assert!(a.solve(&[DVector::zeros(2), DVector::zeros(2)]).is_none());
    }
}
