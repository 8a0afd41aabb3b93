//! Small dense / banded linear algebra used by the solvers.
//!
//! Nothing here is performance-exotic: a Thomas solve for tridiagonal
//! systems, an in-place banded LU without pivoting for the implicit diffusion
//! operator (which is strongly diagonally dominant for the step sizes we
//! take; the solver verifies the residual), and a tiny Gaussian elimination
//! for 3x3 stencil-fitting systems.

use crate::error::{CknError, Result};
use crate::scalar::Real;

/// Solve a tridiagonal system in place. `lower[i]` couples row `i` to
/// `i - 1`, `upper[i]` couples row `i` to `i + 1` (with `lower[0]` and
/// `upper[n-1]` unused). Returns the solution in `rhs`.
pub fn tridiag_solve<T: Real>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &mut [T],
) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(CknError::shape("tridiagonal arrays must share a length"));
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut beta = diag[0];
    if beta == T::zero() {
        return Err(CknError::solver("tridiagonal pivot vanished at row 0"));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == T::zero() {
            return Err(CknError::solver(format!(
                "tridiagonal pivot vanished at row {i}"
            )));
        }
        c[i] = upper[i] / beta;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    rhs[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = d[i] - c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Banded square matrix with `half_bw` sub- and super-diagonals, stored
/// row-major as `data[row][band]` with `band = col - row + half_bw`.
pub struct Banded<T> {
    pub n: usize,
    pub half_bw: usize,
    data: Vec<T>,
}

impl<T: Real> Banded<T> {
    pub fn zeros(n: usize, half_bw: usize) -> Self {
        Banded {
            n,
            half_bw,
            data: vec![T::zero(); n * (2 * half_bw + 1)],
        }
    }

    #[inline]
    fn idx(&self, row: usize, col: usize) -> Option<usize> {
        let h = self.half_bw as isize;
        let off = col as isize - row as isize;
        if off < -h || off > h {
            return None;
        }
        Some(row * (2 * self.half_bw + 1) + (off + h) as usize)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.idx(row, col).map_or(T::zero(), |i| self.data[i])
    }

    /// Add `v` at `(row, col)`; panics if outside the band.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: T) {
        let i = self
            .idx(row, col)
            .unwrap_or_else(|| panic!("entry ({row},{col}) outside band"));
        self.data[i] += v;
    }

    pub fn mul_vec(&self, x: &[T], out: &mut [T]) {
        let h = self.half_bw;
        for row in 0..self.n {
            let lo = row.saturating_sub(h);
            let hi = (row + h).min(self.n - 1);
            let mut acc = T::zero();
            for col in lo..=hi {
                acc += self.get(row, col) * x[col];
            }
            out[row] = acc;
        }
    }

    /// In-place LU without pivoting. Fails on a vanishing pivot.
    pub fn lu_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let h = self.half_bw;
        for k in 0..n {
            let piv = self.get(k, k);
            if piv == T::zero() || !piv.is_finite() {
                return Err(CknError::solver(format!(
                    "banded LU pivot failed at row {k}"
                )));
            }
            let imax = (k + h).min(n - 1);
            for i in (k + 1)..=imax {
                let l = self.get(i, k) / piv;
                if l != T::zero() {
                    let jmax = (k + h).min(n - 1);
                    for j in (k + 1)..=jmax {
                        let upd = l * self.get(k, j);
                        if upd != T::zero() {
                            let idx = self.idx(i, j).expect("fill stays inside band");
                            self.data[idx] -= upd;
                        }
                    }
                }
                let idx = self.idx(i, k).expect("inside band");
                self.data[idx] = l;
            }
        }
        Ok(())
    }

    /// Solve `L U x = b` after [`Banded::lu_in_place`]; solution in `b`.
    pub fn lu_solve(&self, b: &mut [T]) {
        let n = self.n;
        let h = self.half_bw;
        for i in 0..n {
            let lo = i.saturating_sub(h);
            let mut acc = b[i];
            for j in lo..i {
                acc -= self.get(i, j) * b[j];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + h).min(n - 1);
            let mut acc = b[i];
            for j in (i + 1)..=hi {
                acc -= self.get(i, j) * b[j];
            }
            b[i] = acc / self.get(i, i);
        }
    }
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
/// Used for 3-point stencil fitting; `a` is row-major `n x n`.
pub fn dense_solve<T: Real>(a: &mut [T], b: &mut [T], n: usize) -> Result<()> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for k in 0..n {
        let mut piv = k;
        for i in (k + 1)..n {
            if a[i * n + k].abs() > a[piv * n + k].abs() {
                piv = i;
            }
        }
        if a[piv * n + k] == T::zero() {
            return Err(CknError::solver("singular dense system"));
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        for i in (k + 1)..n {
            let l = a[i * n + k] / a[k * n + k];
            for j in k..n {
                let v = a[k * n + j];
                a[i * n + j] = a[i * n + j] - l * v;
            }
            b[i] = b[i] - l * b[k];
        }
    }
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in (i + 1)..n {
            acc = acc - a[i * n + j] * b[j];
        }
        b[i] = acc / a[i * n + i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_poisson_stencil() {
        let n = 64;
        let lower = vec![-1.0f64; n];
        let upper = vec![-1.0f64; n];
        let diag = vec![2.0f64; n];
        // Manufactured solution x_i = i.
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let mut v = 2.0 * x[i];
            if i > 0 {
                v -= x[i - 1];
            }
            if i + 1 < n {
                v -= x[i + 1];
            }
            rhs[i] = v;
        }
        tridiag_solve(&lower, &diag, &upper, &mut rhs).unwrap();
        for i in 0..n {
            assert!((rhs[i] - x[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn banded_lu_round_trips() {
        let n = 40;
        let h = 5;
        let mut m = Banded::<f64>::zeros(n, h);
        // Diagonally dominant band with deterministic pseudo-random fill.
        let mut state = 0x12345678u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        for i in 0..n {
            for j in i.saturating_sub(h)..=(i + h).min(n - 1) {
                if i != j {
                    m.add(i, j, 0.3 * rnd());
                }
            }
            m.add(i, i, 5.0 + rnd());
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        m.mul_vec(&x, &mut b);
        m.lu_in_place().unwrap();
        m.lu_solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn dense_3x3() {
        let mut a = vec![2.0f64, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let mut b = vec![3.0, 5.0, 3.0];
        dense_solve(&mut a, &mut b, 3).unwrap();
        for v in &b {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
