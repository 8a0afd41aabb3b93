//! Closed-form quantities for the weighted interpolation inequalities:
//! parameter bookkeeping, symmetry-breaking thresholds, optimal constants
//! on the line, the explicit cylinder profile, and the self-similar
//! solution of the associated fast diffusion flow.
//!
//! Everything in this module is an explicit formula (or, for the mass
//! normalization, a one-dimensional root-find); the discretized operators
//! live in [`crate::grid`] and are tested against these values.

pub mod barenblatt;
pub mod fs;
pub mod klt;
pub mod params;

pub use barenblatt::{barenblatt_density, barenblatt_mass, barenblatt_pressure, normalize_c_star};
pub use fs::{fs_constants, FsConstants};
pub use klt::KltClosedForms;
pub use params::{CknParams, ManifoldData};

use crate::error::{CknError, Result};
use crate::scalar::Real;
use crate::special::ln_gamma;

/// Symmetry-breaking threshold curve `b_fs(d, a)`: for `a < b < b_fs` the
/// symmetric profile is a strict local maximum of the quotient among
/// symmetric functions but not a global one. Vanishes at `a = 0` for every
/// `d` (where it meets the classical Sobolev corner).
pub fn b_fs<T: Real>(d: u32, a: T) -> Result<T> {
    let a_c = ckn_critical(d)?;
    if !(a < a_c) {
        return Err(CknError::domain(format!(
            "threshold curve needs a < (d-2)/2 = {a_c}, got a = {a}"
        )));
    }
    let dd = T::of_usize(d as usize);
    let gap = a_c - a;
    Ok(dd * gap / (T::two() * (gap * gap + dd - T::one()).sqrt()) + a - a_c)
}

/// The weaker explicit threshold obtained from a direct expansion:
/// `b_direct(d, a) = [d(d-1) + 4 d (a - a_c)^2] / [6(d-1) + 8 (a - a_c)^2] + a - a_c`.
/// Lies above `b_fs` wherever both are defined, so it is strictly inside
/// the symmetry region.
pub fn b_direct<T: Real>(d: u32, a: T) -> Result<T> {
    let a_c = ckn_critical(d)?;
    if !(a < a_c) {
        return Err(CknError::domain(format!(
            "threshold curve needs a < (d-2)/2 = {a_c}, got a = {a}"
        )));
    }
    let dd = T::of_usize(d as usize);
    let g2 = (a - a_c) * (a - a_c);
    let four = T::of(4.0);
    let num = dd * (dd - T::one()) + four * dd * g2;
    let den = T::of(6.0) * (dd - T::one()) + T::two() * four * g2;
    Ok(num / den + a - a_c)
}

/// Curvature exponent `a_c = (d-2)/2`.
pub fn ckn_critical<T: Real>(d: u32) -> Result<T> {
    if d < 2 {
        return Err(CknError::domain(format!("dimension must be >= 2, got {d}")));
    }
    Ok((T::of_usize(d as usize) - T::two()) * T::half())
}

/// The spectral threshold in cylinder variables:
/// `Lambda_FS = 4 lambda_1 / (p^2 - 4)`, where `lambda_1` is the first
/// nonzero eigenvalue of the cross-section Laplacian. Above this value the
/// lowest non-symmetric mode of the linearization turns negative.
pub fn lambda_fs<T: Real>(p: T, lambda1: T) -> Result<T> {
    if !(p > T::two()) {
        return Err(CknError::domain(format!("exponent must satisfy p > 2, got {p}")));
    }
    if !(lambda1 > T::zero()) {
        return Err(CknError::domain(format!(
            "cross-section spectral gap must be positive, got {lambda1}"
        )));
    }
    Ok(T::of(4.0) * lambda1 / (p * p - T::of(4.0)))
}

/// The same threshold expressed through the profile decay rate:
/// `alpha_FS = sqrt(lambda_1 (p-2) / (p+2))`, i.e. `(p-2)/2 * sqrt(Lambda_FS)`.
pub fn alpha_fs<T: Real>(p: T, lambda1: T) -> Result<T> {
    let lam = lambda_fs(p, lambda1)?;
    Ok(T::half() * (p - T::two()) * lam.sqrt())
}

/// Optimal constant of the one-dimensional interpolation inequality as a
/// function of the spectral parameter:
///
/// `mu_R(Lambda) = (p/2) Lambda^{(p+2)/(2p)}
///     * ( 2 sqrt(pi) Gamma(p/(p-2)) / ((p-2) Gamma((3p-2)/(2(p-2)))) )^{(p-2)/p}`.
///
/// Evaluated in log space; the Gamma ratio is shared with
/// [`KltClosedForms`] through the inverse relation
/// `lambda_r(mu_r(Lambda)) = Lambda`.
pub fn mu_r<T: Real>(p: T, lambda: T) -> Result<T> {
    if !(p > T::two()) {
        return Err(CknError::domain(format!("exponent must satisfy p > 2, got {p}")));
    }
    if !(lambda > T::zero()) {
        return Err(CknError::domain(format!("spectral parameter must be positive, got {lambda}")));
    }
    let two = T::two();
    let pm2 = p - two;
    let ln_ratio = two.ln() + T::half() * T::PI().ln() + ln_gamma(p / pm2)?
        - pm2.ln()
        - ln_gamma((T::of(3.0) * p - two) / (two * pm2))?;
    let ln_mu = (p * T::half()).ln() + (p + two) / (two * p) * lambda.ln() + pm2 / p * ln_ratio;
    Ok(ln_mu.exp())
}

/// Optimal constant among symmetric functions on the product cylinder:
/// the line constant times the cross-section volume to the power `1 - 2/p`.
pub fn mu_star<T: Real>(p: T, vol: T, lambda: T) -> Result<T> {
    if !(vol > T::zero()) {
        return Err(CknError::domain(format!("volume must be positive, got {vol}")));
    }
    Ok(vol.powf(T::one() - T::two() / p) * mu_r(p, lambda)?)
}

/// Proportionality constant between the entropy-production functional of
/// the fast diffusion flow and the symmetric optimal constant:
/// `eta = 4 ((n-1)/(n-2))^2 alpha^{1 - 2/p}`.
pub fn eta<T: Real>(params: &CknParams<T>) -> T {
    let n = params.n;
    let ratio = (n - T::one()) / (n - T::two());
    T::of(4.0) * ratio * ratio * params.alpha.powf(T::one() - T::two() / params.p)
}

/// The explicit symmetric extremal profile on the cylinder:
/// `phi(s) = ((p/2) Lambda)^{1/(p-2)} cosh(alpha s)^{-2/(p-2)}`
/// with `alpha = (p-2)/2 sqrt(Lambda)`. Uses a log-space `cosh` so that
/// arguments up to `|alpha s| ~ 700` stay finite.
pub fn phi_lambda<T: Real>(p: T, lambda: T, s: T) -> Result<T> {
    if !(p > T::two()) || !(lambda > T::zero()) {
        return Err(CknError::domain(format!(
            "profile needs p > 2 and Lambda > 0, got p = {p}, Lambda = {lambda}"
        )));
    }
    let pm2 = p - T::two();
    let alpha = T::half() * pm2 * lambda.sqrt();
    let ln_beta = (p * lambda * T::half()).ln() / pm2;
    Ok((ln_beta - T::two() / pm2 * (alpha * s).ln_cosh()).exp())
}

/// Derivative of [`phi_lambda`] in the axial variable:
/// `phi'(s) = -(2 alpha / (p-2)) tanh(alpha s) phi(s)`.
pub fn phi_lambda_ds<T: Real>(p: T, lambda: T, s: T) -> Result<T> {
    let pm2 = p - T::two();
    let alpha = T::half() * pm2 * lambda.sqrt();
    let phi = phi_lambda(p, lambda, s)?;
    Ok(-(T::two() * alpha / pm2) * (alpha * s).tanh() * phi)
}
