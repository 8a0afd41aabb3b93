//! Parameter bundles: the weighted-inequality wedge and the factor manifold.

use crate::error::{CknError, Result};
use crate::scalar::Real;
use crate::special::gamma;

/// Parameters of the weighted interpolation inequality and of its cylinder
/// reformulation.
///
/// Derived quantities are computed once on construction:
///
/// * `a_c = (d-2)/2`, `lambda = (a_c - a)^2`;
/// * `p = 2d / (d - 2 + 2(b-a))`, `n = 2p/(p-2) = d/(1+a-b)` (the effective
///   dimension; not an integer in general), `m = 1 - 1/n`;
/// * `alpha = (1+a-b)(a_c-a)/(a_c-a+b)`, the radial change-of-variables
///   exponent, which coincides with `(p-2)/2 * sqrt(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CknParams<T = f64> {
    pub d: u32,
    pub a: T,
    pub b: T,
    pub a_c: T,
    pub p: T,
    pub lambda: T,
    pub alpha: T,
    pub n: T,
    pub m: T,
    /// Set when the bundle was built from cylinder data `(p, lambda)` with
    /// `sqrt(lambda) >= a_c + d/p`; `a` and `b` then hold the formal
    /// pull-back values and should not be fed to weighted-space formulas.
    pub cylinder_only: bool,
}

impl<T: Real> CknParams<T> {
    /// Build from the weighted-space parameters `(d, a, b)`.
    pub fn derive(d: u32, a: T, b: T) -> Result<Self> {
        if d < 2 {
            return Err(CknError::domain(format!("dimension d = {d} < 2")));
        }
        let df = T::of_usize(d as usize);
        let a_c = (df - T::two()) / T::two();
        if !(a < a_c) {
            return Err(CknError::domain(format!(
                "a = {a} violates a < a_c = {a_c}"
            )));
        }
        if !(b > a) {
            return Err(CknError::domain(format!("b = {b} violates a < b (a = {a})")));
        }
        if !(b < a + T::one()) {
            // b = a+1 is the Hardy endpoint: p = 2, n = infinity; the bundle
            // cannot represent it.
            return Err(CknError::domain(format!(
                "b = {b} violates b < a + 1 (a = {a}); the endpoint b = a + 1 has p = 2"
            )));
        }
        let p = T::two() * df / (df - T::two() + T::two() * (b - a));
        let lambda = (a_c - a) * (a_c - a);
        let alpha = (T::one() + a - b) * (a_c - a) / (a_c - a + b);
        let n = T::two() * p / (p - T::two());
        // Internal consistency: the two routes to n agree to rounding.
        let n_alt = df / (T::one() + a - b);
        if ((n - n_alt) / n).abs() > T::of(1e-12) {
            return Err(CknError::domain(format!(
                "inconsistent effective dimension: {n} vs {n_alt}"
            )));
        }
        let m = T::one() - T::one() / n;
        Ok(CknParams {
            d,
            a,
            b,
            a_c,
            p,
            lambda,
            alpha,
            n,
            m,
            cylinder_only: false,
        })
    }

    /// Build from the cylinder-side parameters `(d, p, lambda)`.
    ///
    /// The weighted-space pair is recovered via `a = a_c - sqrt(lambda)`,
    /// `b = d/p - sqrt(lambda)`; when `sqrt(lambda) >= a_c + d/p` the bundle
    /// is flagged [`CknParams::cylinder_only`].
    pub fn from_cylinder(d: u32, p: T, lambda: T) -> Result<Self> {
        if d < 2 {
            return Err(CknError::domain(format!("dimension d = {d} < 2")));
        }
        let df = T::of_usize(d as usize);
        if !(p > T::two()) {
            return Err(CknError::domain(format!("p = {p} violates p > 2")));
        }
        if d > 2 {
            let p_crit = T::two() * df / (df - T::two());
            if !(p < p_crit) {
                return Err(CknError::domain(format!(
                    "p = {p} violates p < 2d/(d-2) = {p_crit}"
                )));
            }
        }
        if !(lambda > T::zero()) {
            return Err(CknError::domain(format!("lambda = {lambda} must be positive")));
        }
        let a_c = (df - T::two()) / T::two();
        let sqrt_lambda = lambda.sqrt();
        let alpha = (p - T::two()) / T::two() * sqrt_lambda;
        let n = T::two() * p / (p - T::two());
        let m = T::one() - T::one() / n;
        let a = a_c - sqrt_lambda;
        let b = df / p - sqrt_lambda;
        let cylinder_only = sqrt_lambda >= a_c + df / p;
        Ok(CknParams {
            d,
            a,
            b,
            a_c,
            p,
            lambda,
            alpha,
            n,
            m,
            cylinder_only,
        })
    }

    /// Dual exponent `q = p/(p-2)` of the spectral-estimate formulation.
    pub fn q(&self) -> T {
        self.p / (self.p - T::two())
    }
}

/// The compact factor manifold of the cylinder: spectral and volume data is
/// all the solvers need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldData<T = f64> {
    /// Intrinsic dimension (`d - 1` for the cylinder over `d` weighted
    /// dimensions).
    pub dim: u32,
    /// First nonzero eigenvalue of minus the Laplace–Beltrami operator.
    pub lambda1: T,
    /// Uniform Ricci lower bound (`Ric >= kappa * g`).
    pub kappa: T,
    /// Riemannian volume.
    pub vol: T,
    /// Round sphere of radius one (the circle of length `2 pi` included).
    pub is_sphere: bool,
}

impl<T: Real> ManifoldData<T> {
    /// Unit round sphere `S^m`, `m >= 1`: `lambda1 = m`, `kappa = m - 1`,
    /// `vol = 2 pi^{(m+1)/2} / Gamma((m+1)/2)`.
    pub fn sphere(m: u32) -> Result<Self> {
        if m < 1 {
            return Err(CknError::domain("sphere dimension must be >= 1"));
        }
        let mf = T::of_usize(m as usize);
        let half = (mf + T::one()) / T::two();
        let vol = T::two() * T::PI().powf(half) / gamma(half)?;
        Ok(ManifoldData {
            dim: m,
            lambda1: mf,
            kappa: mf - T::one(),
            vol,
            is_sphere: true,
        })
    }

    /// Circle of length `len`: `lambda1 = (2 pi / len)^2`.
    pub fn circle(len: T) -> Result<Self> {
        if !(len > T::zero()) {
            return Err(CknError::domain("circle length must be positive"));
        }
        let two_pi = T::two() * T::PI();
        let lambda1 = (two_pi / len) * (two_pi / len);
        Ok(ManifoldData {
            dim: 1,
            lambda1,
            kappa: T::zero(),
            vol: len,
            is_sphere: len == two_pi,
        })
    }

    /// Arbitrary manifold from spectral data. For `dim >= 2` the
    /// Lichnerowicz bound `lambda1 >= dim * kappa / (dim - 1)` is enforced.
    pub fn abstract_data(dim: u32, lambda1: T, kappa: T, vol: T) -> Result<Self> {
        if dim < 1 {
            return Err(CknError::domain("manifold dimension must be >= 1"));
        }
        if !(lambda1 > T::zero()) || !(vol > T::zero()) {
            return Err(CknError::domain(
                "lambda1 and volume must be positive",
            ));
        }
        if dim >= 2 {
            let bound = T::of_usize(dim as usize) * kappa / T::of_usize(dim as usize - 1);
            if lambda1 < bound {
                return Err(CknError::domain(format!(
                    "lambda1 = {lambda1} violates the Lichnerowicz bound {bound}"
                )));
            }
        }
        Ok(ManifoldData {
            dim,
            lambda1,
            kappa,
            vol,
            is_sphere: false,
        })
    }
}
