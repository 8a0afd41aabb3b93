//! Finite-difference stencils for the logarithmic radial coordinate.
//!
//! In s = log r the radial operator has constant coefficients but its
//! kernel-relevant functions are exponentials: quadratic pressures a + b r²
//! become a + b e^{2s}. All stencils here are *fitted* so that they are
//! exact on span{1, e^{2s}, e^{-2s}} (and remain second-order accurate on
//! smooth functions): the denominators are sinh-corrected versions of the
//! classical ones, and the one-sided boundary stencils are solved in closed
//! form from the same three exactness conditions. This is what lets the
//! quadratic-pressure identities hold to roundoff rather than O(h²).

use crate::scalar::Real;

/// Stencil data for a uniform grid in s with spacing `h`.
#[derive(Debug, Clone)]
pub(crate) struct SStencils<T> {
    pub h: T,
    /// Centered first derivative denominator: sinh(2h).
    pub d1_den: T,
    /// Centered second derivative denominator: sinh²(h).
    pub d2_den: T,
    /// Face (midpoint) first-difference denominator: sinh(h).
    pub face_den: T,
    /// One-sided first-derivative coefficients at the left edge (nodes 0,1,2).
    pub d1_left: [T; 3],
    /// One-sided second-derivative coefficients at the left edge.
    pub d2_left: [T; 3],
    /// One-sided first-derivative coefficients at the right edge (nodes N-3,N-2,N-1).
    pub d1_right: [T; 3],
    /// One-sided second-derivative coefficients at the right edge.
    pub d2_right: [T; 3],
}

impl<T: Real> SStencils<T> {
    pub fn new(h: T) -> Self {
        let two = T::two();
        let four = T::of(4.0);
        let x = (two * h).exp(); // e^{2h}
        let sinh2h = (two * h).sinh();
        let sinh_h = h.sinh();

        // First derivative at the left edge from nodes at offsets {0, h, 2h},
        // exact on {1, e^{2s}, e^{-2s}}. Eliminating the constant row leaves
        // a 2x2 system whose solution reduces (using e^{2h}·e^{-2h} = 1) to:
        //   c2 = -1/sinh(2h),  c1 = 2/(e^{2h}-1) + (e^{2h}+1)/sinh(2h).
        let d1_c2 = -T::one() / sinh2h;
        let d1_c1 = two / (x - T::one()) - d1_c2 * (x + T::one());
        let d1_c0 = -d1_c1 - d1_c2;
        let d1_left = [d1_c0, d1_c1, d1_c2];
        let d1_right = [-d1_c2, -d1_c1, -d1_c0];

        // Second derivative, same nodes, right sides {0, 4, 4}:
        //   c2 = 1/sinh²(h),   c1 = 4/(e^{2h}-1) - c2 (e^{2h}+1).
        let d2_c2 = T::one() / (sinh_h * sinh_h);
        let d2_c1 = four / (x - T::one()) - d2_c2 * (x + T::one());
        let d2_c0 = -d2_c1 - d2_c2;
        let d2_left = [d2_c0, d2_c1, d2_c2];
        let d2_right = [d2_c2, d2_c1, d2_c0];

        Self {
            h,
            d1_den: sinh2h,
            d2_den: sinh_h * sinh_h,
            face_den: sinh_h,
            d1_left,
            d2_left,
            d1_right,
            d2_right,
        }
    }

    /// First derivative along a row of samples; one-sided at the two ends.
    #[inline]
    pub fn d1(&self, row: &[T], i: usize) -> T {
        let n = row.len();
        if i == 0 {
            self.d1_left[0] * row[0] + self.d1_left[1] * row[1] + self.d1_left[2] * row[2]
        } else if i == n - 1 {
            self.d1_right[0] * row[n - 3] + self.d1_right[1] * row[n - 2] + self.d1_right[2] * row[n - 1]
        } else {
            (row[i + 1] - row[i - 1]) / self.d1_den
        }
    }

    /// Second derivative along a row of samples; one-sided at the two ends.
    #[inline]
    pub fn d2(&self, row: &[T], i: usize) -> T {
        let n = row.len();
        if i == 0 {
            self.d2_left[0] * row[0] + self.d2_left[1] * row[1] + self.d2_left[2] * row[2]
        } else if i == n - 1 {
            self.d2_right[0] * row[n - 3] + self.d2_right[1] * row[n - 2] + self.d2_right[2] * row[n - 1]
        } else {
            (row[i + 1] - (row[i] + row[i]) + row[i - 1]) / self.d2_den
        }
    }
}

/// Normalization of the divergence-form radial operator: the denominator
/// that makes
///   [σ_{i+1/2}(w_{i+1}-w_i) - σ_{i-1/2}(w_i-w_{i-1})] / (ρ_i Δ²)
/// with σ = e^{(n-2)s}, ρ = e^{ns} exactly reproduce
/// (w'' + (n-2) w') e^{-2s} on w = e^{2s} (value 2n). Equals
/// [e^{(n-2)h/2}(e^{2h}-1) - e^{-(n-2)h/2}(1-e^{-2h})] / (2n) = h² + O(h⁴).
pub(crate) fn divergence_norm<T: Real>(h: T, n: T) -> T {
    let two = T::two();
    let a = (n - two) * T::half();
    // 2cosh((a+2)h) - 2cosh(ah), written to avoid cancellation for small h:
    // = 4 sinh((a+1)h) sinh(h).
    let num = T::of(4.0) * ((a + T::one()) * h).sinh() * h.sinh();
    num / (two * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_solve;

    fn check_exactness(h: f64) {
        let st = SStencils::<f64>::new(h);
        let n = 9usize;
        let s0 = 0.37;
        let grid: Vec<f64> = (0..n).map(|i| s0 + i as f64 * h).collect();
        // basis functions and their first/second derivatives
        let funcs: [(fn(f64) -> f64, fn(f64) -> f64, fn(f64) -> f64); 3] = [
            (|_| 1.0, |_| 0.0, |_| 0.0),
            (|s| (2.0 * s).exp(), |s| 2.0 * (2.0 * s).exp(), |s| 4.0 * (2.0 * s).exp()),
            (|s| (-2.0 * s).exp(), |s| -2.0 * (-2.0 * s).exp(), |s| 4.0 * (-2.0 * s).exp()),
        ];
        for (f, df, ddf) in funcs {
            let row: Vec<f64> = grid.iter().map(|&s| f(s)).collect();
            for i in 0..n {
                let scale = row[i].abs().max(1.0) / h;
                assert!(
                    (st.d1(&row, i) - df(grid[i])).abs() < 1e-11 * scale,
                    "d1 at i={i}, h={h}"
                );
                assert!(
                    (st.d2(&row, i) - ddf(grid[i])).abs() < 1e-11 * scale / h,
                    "d2 at i={i}, h={h}"
                );
            }
        }
    }

    #[test]
    fn exact_on_the_fitted_span() {
        for h in [0.5, 0.1, 0.02] {
            check_exactness(h);
        }
    }

    #[test]
    fn closed_form_edge_coefficients_match_a_direct_solve() {
        let h = 0.13;
        let st = SStencils::<f64>::new(h);
        // Rebuild the left-edge stencils by brute force.
        let basis = |s: f64| [1.0, (2.0 * s).exp(), (-2.0 * s).exp()];
        let mut a = [[0.0f64; 3]; 3];
        for (k, col) in [0.0, h, 2.0 * h].iter().enumerate() {
            let b = basis(*col);
            for r in 0..3 {
                a[r][k] = b[r];
            }
        }
        let flat: Vec<f64> = a.iter().flatten().copied().collect();
        let mut m1 = flat.clone();
        let mut c1 = [0.0, 2.0, -2.0];
        dense_solve(&mut m1, &mut c1, 3).unwrap();
        let mut m2 = flat;
        let mut c2 = [0.0, 4.0, 4.0];
        dense_solve(&mut m2, &mut c2, 3).unwrap();
        for k in 0..3 {
            assert!((st.d1_left[k] - c1[k]).abs() < 1e-9 / h, "d1[{k}]");
            assert!((st.d2_left[k] - c2[k]).abs() < 1e-9 / h / h, "d2[{k}]");
        }
    }

    #[test]
    fn second_order_on_generic_smooth_functions() {
        // Denominator corrections keep O(h²) behaviour off the fitted span.
        let f = |s: f64| (0.7 * s).sin() + 0.3 * s * s;
        let df = |s: f64| 0.7 * (0.7 * s).cos() + 0.6 * s;
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&h| {
                let st = SStencils::<f64>::new(h);
                let row: Vec<f64> = (0..7).map(|i| f(0.5 + i as f64 * h)).collect();
                (st.d1(&row, 3) - df(0.5 + 3.0 * h)).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.7 && order < 2.3, "order {order}");
    }

    #[test]
    fn divergence_norm_limits() {
        // h² to leading order with an (n/2)²-sized correction coefficient;
        // exact value tested against the defining form.
        for &(h, n) in &[(0.1f64, 4.0), (0.02, 7.5), (0.3, 2.5)] {
            let direct = ((n - 2.0) * h / 2.0).exp() * ((2.0 * h).exp() - 1.0)
                - (-(n - 2.0) * h / 2.0).exp() * (1.0 - (-2.0 * h).exp());
            let v = divergence_norm(h, n);
            // The defining form above cancels near-equal exponentials, so
            // compare at a few hundred ulps rather than machine precision.
            assert!((v - direct / (2.0 * n)).abs() < 1e-12 * v.abs());
            assert!((v / (h * h) - 1.0).abs() < (1.0 + n * n / 24.0) * h * h, "h={h}, n={n}");
        }
    }
}
