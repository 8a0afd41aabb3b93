//! Constants entering the symmetry / symmetry-breaking dichotomy: the
//! optimized spectral constant `lambda_star`, the interpolation parameter
//! `theta_star` and the quadratic-form coefficients of the optimized
//! carré-du-champ estimate.

use super::params::ManifoldData;
use crate::error::{CknError, Result};
use crate::scalar::Real;

/// Output of [`fs_constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsConstants<T = f64> {
    pub d: u32,
    pub n: T,
    /// `delta = (n - d) / ((d-1)(n-1))`.
    pub delta: T,
    /// Optimal interpolation parameter; `0` when `d = 2` (no gradient
    /// interpolation is used on the circle).
    pub theta_star: T,
    /// Spectral constant of the integrated estimate: the coefficient
    /// `lambda` such that `K >= (lambda - (n-2) alpha^2) * (gradient term)`.
    pub lambda_star: T,
    /// Elementary lower bound `kappa + delta * lambda1 <= lambda_star`.
    pub lambda_0: T,
    /// Quadratic-form coefficients `(a, b, c)` of the optimized estimate at
    /// `theta = theta_star`; `None` when `d = 2` (the optimization is
    /// degenerate there).
    pub coeffs: Option<(T, T, T)>,
    /// Coefficient of the quartic gradient remainder on spheres, evaluated
    /// from its published display. The display is negative on the whole
    /// admissible range (e.g. `-4.75` at `(d, n) = (3, 4)`) even though the
    /// surrounding text calls it positive; the value is reported verbatim
    /// and is not used by any default gate.
    pub zeta_star: Option<T>,
    lambda1: T,
    kappa: T,
}

/// Compute the spectral constants for base dimension `d`, effective
/// dimension `n` and factor manifold `manifold` (of dimension `d - 1`).
pub fn fs_constants<T: Real>(
    d: u32,
    n: T,
    manifold: &ManifoldData<T>,
) -> Result<FsConstants<T>> {
    if d < 2 {
        return Err(CknError::domain(format!("dimension d = {d} < 2")));
    }
    if manifold.dim != d - 1 {
        return Err(CknError::shape(format!(
            "manifold dimension {} does not match d - 1 = {}",
            manifold.dim,
            d - 1
        )));
    }
    let df = T::of_usize(d as usize);
    if !(n > df) {
        return Err(CknError::domain(format!(
            "effective dimension n = {n} must exceed d = {d}"
        )));
    }
    let one = T::one();
    let delta = (n - df) / ((df - one) * (n - one));
    let lambda1 = manifold.lambda1;
    let kappa = manifold.kappa;
    let lambda_0 = kappa + delta * lambda1;

    if d == 2 {
        // No interpolation with the Bochner term is possible on the circle;
        // the optimized constant reduces to (n-2)/(n-1) of lambda1.
        let lambda_star = (n - T::two()) / (n - one) * lambda1;
        return Ok(FsConstants {
            d,
            n,
            delta,
            theta_star: T::zero(),
            lambda_star,
            lambda_0,
            coeffs: None,
            zeta_star: None,
            lambda1,
            kappa,
        });
    }

    // d >= 3 (hence n > 3): closed forms are regular.
    let d1 = df - one;
    let d2 = df - T::two();
    let dp1 = df + one;
    let n1 = n - one;
    let n3 = n - T::of(3.0);
    let poly = df * (n * n - n - T::of(4.0)) - (n * n - T::of(3.0) * n - T::two());
    let theta_star =
        d2 * n1 * (T::of(3.0) * n + one - df * (T::of(3.0) * n + T::of(5.0))) / (dp1 * poly);
    let np1 = n + one;
    let coeff_a = d1 * d2 * np1 * np1 / (dp1 * poly);
    let coeff_b = -(np1 * d1) / (n3 * dp1);
    let coeff_c = d1 * poly / (d2 * dp1 * n3 * n3);

    let consts_no_lambda = FsConstants {
        d,
        n,
        delta,
        theta_star,
        lambda_star: T::zero(), // placeholder, fixed below
        lambda_0,
        coeffs: Some((coeff_a, coeff_b, coeff_c)),
        zeta_star: None,
        lambda1,
        kappa,
    };

    let (lambda_star, zeta_star) = if manifold.is_sphere {
        // On spheres lambda_theta is independent of theta.
        let ls = (n - T::two()) * d1 / n1;
        let zs = -(d1 * (df * (T::of(3.0) * n + T::of(5.0)) - T::of(3.0) * n - one))
            / (d2 * dp1 * dp1 * n3 * n3);
        (ls, Some(zs))
    } else {
        (consts_no_lambda.lambda_theta(theta_star)?, None)
    };

    Ok(FsConstants {
        lambda_star,
        zeta_star,
        ..consts_no_lambda
    })
}

impl<T: Real> FsConstants<T> {
    /// The one-parameter family of spectral constants
    /// `lambda_theta = (1 + delta theta (d-1)/(d-2)) kappa + delta (1-theta) lambda1`.
    ///
    /// For `d = 2` only `theta = 0` is admissible.
    pub fn lambda_theta(&self, theta: T) -> Result<T> {
        let df = T::of_usize(self.d as usize);
        let one = T::one();
        if self.d == 2 {
            if theta != T::zero() {
                return Err(CknError::domain(
                    "lambda_theta on the circle requires theta = 0",
                ));
            }
            return Ok(self.kappa + self.delta * self.lambda1);
        }
        let factor = one + self.delta * theta * (df - one) / (df - T::two());
        Ok(factor * self.kappa + self.delta * (one - theta) * self.lambda1)
    }
}
