//! Closed forms for the one-dimensional Schrödinger eigenvalue bound:
//! the optimal constant of the line inequality, its scaling exponent, and
//! the saturating potential family.

use crate::error::{CknError, Result};
use crate::scalar::Real;
use crate::special::ln_gamma;

/// Constants of the one-bound-state inequality
/// `lambda_1[V]^{q - 1/2} <= mu1(q)^{q - 1/2} * || V ||_{L^q}^{q}`
/// on the real line (written multiplicatively via `Lambda_R`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KltClosedForms<T = f64> {
    /// Lebesgue exponent of the potential norm; must exceed 1.
    pub q: T,
    /// Optimal constant `mu1(q) = q (q-1) (sqrt(pi) Gamma(q) / Gamma(q + 1/2))^{1/q}`.
    pub mu1: T,
    /// Scaling exponent `beta = 2q / (2q - 1)` of the spectral estimate.
    pub beta: T,
}

impl<T: Real> KltClosedForms<T> {
    pub fn new(q: T) -> Result<Self> {
        if !(q > T::one()) {
            return Err(CknError::domain(format!(
                "one-dimensional bound needs q > 1, got q = {q}"
            )));
        }
        let half = T::half();
        let ln_ratio = half * T::PI().ln() + ln_gamma(q)? - ln_gamma(q + half)?;
        let mu1 = q * (q - T::one()) * (ln_ratio / q).exp();
        let beta = T::two() * q / (T::two() * q - T::one());
        Ok(Self { q, mu1, beta })
    }

    /// Spectral estimate as a function of the norm:
    /// `Lambda_R(mu) = (q-1)^2 (mu / mu1)^beta`.
    pub fn lambda_r(&self, mu: T) -> T {
        let ratio = mu / self.mu1;
        (self.q - T::one()) * (self.q - T::one()) * ratio.powf(self.beta)
    }

    /// The potential saturating the bound at unit scale:
    /// `V1(s) = q (q-1) / cosh^2 s`, whose ground state is `-(q-1)^2`.
    pub fn v1(&self, s: T) -> T {
        let sech = T::one() / s.cosh();
        self.q * (self.q - T::one()) * sech * sech
    }

    /// `L^q` norm of `V1` (closed form: equals `mu1`).
    pub fn v1_norm(&self) -> T {
        self.mu1
    }
}
