//! Spectral consequences of the interpolation inequality: the sharp
//! principal-eigenvalue bound for Schrödinger operators on cylinders and
//! the Hardy inequality with potential it implies on Euclidean space.
//!
//! The chain of reductions:
//!
//! * on the line, the lowest eigenvalue `-λ₁[V]` of `-∂²_s - V` obeys
//!   `λ₁[V] ≤ Λ_R(‖V‖_q)` with the closed form
//!   `Λ_R(μ) = (q-1)² (μ/μ₁)^β` ([`crate::closed_forms::KltClosedForms`]),
//!   saturated exactly by the `q(q-1)/cosh²` family — [`klt_check_1d`]
//!   verifies the bound for a sampled potential against the discrete
//!   eigensolver;
//! * on a cylinder `ℝ × M`, the optimal bound `Λ(μ)` follows the
//!   separated (line) value `Λ_⋆(μ) = Λ_R(vol^{-1/q} μ)` up to a
//!   threshold `μ⁎` and then departs from it when symmetry breaks; the
//!   threshold is bracketed in closed form ([`threshold_bracket`]) and
//!   the curve beyond it is recovered by inverting the quotient
//!   minimization of [`crate::minimize`] — that table is [`KltCurve`];
//! * substituting the curve into a weighted Hölder estimate yields a
//!   Hardy inequality with potential whose certified coefficient of
//!   `∫ |u|²/|x|²` is computed by [`hardy_gap`].
//!
//! Everything here is a consumer: the closed forms come from
//! `closed_forms`, eigenvalues from `stability`, minimization from
//! `minimize`. The one genuinely new numeric piece is the monotone cubic
//! inversion of the sampled branch, kept deliberately small.

use rayon::prelude::*;

use crate::closed_forms::{
    fs_constants, lambda_fs, mu_star, CknParams, KltClosedForms, ManifoldData,
};
use crate::error::{CknError, Result};
use crate::grid::{CylinderGrid, GridConfig, MeasureKind};
use crate::minimize::{InitKind, MinimizeConfig, Minimizer, SweepGridSpec};
use crate::quad::trapezoid;
use crate::scalar::Real;
use crate::stability::schrodinger_ground;

/// Closed-form bracket `[low, high]` for the norm threshold `μ⁎` below
/// which the cylinder bound coincides with the separated line bound:
///
/// ```text
/// vol^{2/(2q-1)} λ⋆/(2(q-1)) μ₁^β  ≤  μ⁎^β  ≤  vol^{2/(2q-1)} λ₁/(2q-1) μ₁^β
/// ```
///
/// with `λ⋆` the rigidity constant of the factor manifold. For spheres
/// the two bounds agree exactly.
pub fn threshold_bracket<T: Real>(q: T, manifold: &ManifoldData<T>) -> Result<(T, T)> {
    let k = KltClosedForms::new(q)?;
    let n = T::two() * q;
    let d = manifold.dim + 1;
    let fs = fs_constants(d, n, manifold)?;
    let common = manifold.vol.powf(T::two() / (T::two() * q - T::one())) * k.mu1.powf(k.beta);
    let low_b = common * fs.lambda_star / (T::two() * (q - T::one()));
    let high_b = common * manifold.lambda1 / (T::two() * q - T::one());
    Ok((low_b.powf(T::one() / k.beta), high_b.powf(T::one() / k.beta)))
}

/// Which branch of the cylinder curve a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Below the symmetry threshold: the separated closed form is exact.
    ClosedForm,
    /// Above it: the value comes from inverting the numeric quotient
    /// minimization.
    Inverted,
}

/// One `(μ, Λ(μ))` sample of the cylinder curve.
#[derive(Debug, Clone, Copy)]
pub struct KltSample<T = f64> {
    pub mu: T,
    pub lambda: T,
    pub regime: Regime,
}

/// Build options for [`KltCurve::build`]: how far past the threshold to
/// tabulate, how many samples per branch, and the minimization setup for
/// the numeric branch.
#[derive(Debug, Clone)]
pub struct KltCurveConfig<T = f64> {
    /// Largest Λ of the numeric branch; must exceed the threshold `Λ_FS`.
    pub lambda_max: T,
    /// Closed-form samples placed in `(0, Λ_FS]`.
    pub n_closed: usize,
    /// Numeric samples placed in `(Λ_FS, lambda_max]`.
    pub n_numeric: usize,
    pub grid: SweepGridSpec<T>,
    pub minimize: MinimizeConfig<T>,
}

impl<T: Real> KltCurveConfig<T> {
    pub fn new(lambda_max: T, grid: SweepGridSpec<T>) -> Self {
        Self {
            lambda_max,
            n_closed: 8,
            n_numeric: 12,
            grid,
            minimize: MinimizeConfig::new(InitKind::Mode1Perturbed),
        }
    }
}

/// Monotone cubic interpolant (Fritsch–Carlson limited tangents) through
/// strictly increasing knots; never overshoots, so the inverted branch
/// stays monotone between samples.
#[derive(Debug, Clone)]
struct MonotoneCubic<T> {
    x: Vec<T>,
    y: Vec<T>,
    slope: Vec<T>,
}

impl<T: Real> MonotoneCubic<T> {
    fn fit(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(CknError::shape("interpolation needs >= 2 matched knots"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CknError::domain("interpolation abscissae must increase"));
        }
        let sec: Vec<T> =
            (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        if sec.iter().any(|&s| s < T::zero()) {
            return Err(CknError::domain("interpolated data must be non-decreasing"));
        }
        let mut slope = vec![T::zero(); n];
        slope[0] = sec[0];
        slope[n - 1] = sec[n - 2];
        for i in 1..n - 1 {
            // harmonic-mean tangent: zero at local flats, and bounded by
            // 3 min(sec) so the cubic stays monotone on both panels
            if sec[i - 1] * sec[i] > T::zero() {
                let w1 = T::two() * (x[i + 1] - x[i]) + (x[i] - x[i - 1]);
                let w2 = (x[i + 1] - x[i]) + T::two() * (x[i] - x[i - 1]);
                slope[i] = (w1 + w2) / (w1 / sec[i - 1] + w2 / sec[i]);
            }
        }
        Ok(Self { x, y, slope })
    }

    fn eval(&self, xq: T) -> T {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let mut i = match self.x.binary_search_by(|a| a.partial_cmp(&xq).unwrap()) {
            Ok(k) => return self.y[k],
            Err(k) => k - 1,
        };
        i = i.min(n - 2);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (h00, h10) = ((T::one() + T::two() * t) * (T::one() - t) * (T::one() - t),
            t * (T::one() - t) * (T::one() - t));
        let (h01, h11) = (t * t * (T::of(3.0) - T::two() * t), t * t * (t - T::one()));
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1]
            + h11 * h * self.slope[i + 1]
    }
}

/// Sampled sharp bound `μ ↦ Λ(μ)` for `-∂²_s - Δ_ω - V` on the cylinder
/// `ℝ × M`: exact separated closed form up to the symmetry threshold,
/// inverted quotient minimization beyond it.
#[derive(Debug, Clone)]
pub struct KltCurve<T = f64> {
    pub q: T,
    /// Interpolation exponent `p = 2q/(q-1)` the curve is dual to.
    pub p: T,
    pub manifold: ManifoldData<T>,
    /// `(μ, Λ)` samples over both regimes, increasing in μ.
    pub samples: Vec<KltSample<T>>,
    /// Closed-form bracket for the regime boundary `μ⁎`.
    pub threshold: (T, T),
    consts: KltClosedForms<T>,
    inverted: MonotoneCubic<T>,
    /// First μ served by the inverted table (the exact junction value).
    mu_junction: T,
    mu_max: T,
}

impl<T: Real> KltCurve<T> {
    /// Tabulate the curve. The numeric branch minimizes the quotient at
    /// `n_numeric` values of Λ in `(Λ_FS, lambda_max]`, concurrently; a
    /// non-converged point aborts the build (a poisoned knot would
    /// corrupt every query that interpolates across it).
    pub fn build(
        q: T,
        manifold: &ManifoldData<T>,
        cfg: &KltCurveConfig<T>,
    ) -> Result<Self> {
        let consts = KltClosedForms::new(q)?;
        let p = T::two() * q / (q - T::one());
        let d = manifold.dim + 1;
        let lam_fs = lambda_fs(p, manifold.lambda1)?;
        let threshold = threshold_bracket(q, manifold)?;
        if !(cfg.lambda_max > lam_fs) {
            return Err(CknError::domain(format!(
                "lambda_max = {} does not reach past the threshold {lam_fs}",
                cfg.lambda_max
            )));
        }
        if cfg.n_closed < 2 || cfg.n_numeric < 2 {
            return Err(CknError::domain("need at least two samples per branch"));
        }

        let mut samples = Vec::with_capacity(cfg.n_closed + cfg.n_numeric);
        for j in 1..=cfg.n_closed {
            let lam = lam_fs * T::of_usize(j) / T::of_usize(cfg.n_closed);
            samples.push(KltSample {
                mu: mu_star(p, manifold.vol, lam)?,
                lambda: lam,
                regime: Regime::ClosedForm,
            });
        }
        let mu_junction = samples[cfg.n_closed - 1].mu;

        let span = cfg.lambda_max - lam_fs;
        let numeric = (1..=cfg.n_numeric)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&k| {
                let lam = lam_fs + span * T::of_usize(k) / T::of_usize(cfg.n_numeric);
                let params = CknParams::from_cylinder(d, p, lam)?;
                let grid = CylinderGrid::build(GridConfig {
                    params,
                    manifold: manifold.clone(),
                    s_min: -cfg.grid.s_half,
                    s_max: cfg.grid.s_half,
                    n_s: cfg.grid.n_s,
                    angular: cfg.grid.angular,
                    measure: MeasureKind::Cylinder,
                    truncation_tol: cfg.grid.truncation_tol,
                })?;
                let min = Minimizer::new(&grid)?;
                let run = min.minimize(&cfg.minimize)?;
                if !run.converged {
                    return Err(CknError::solver(format!(
                        "quotient minimization did not converge at Λ = {lam} \
                         ({} iterations, residual {:e})",
                        run.iterations, run.el_residual
                    )));
                }
                Ok(KltSample { mu: run.mu_estimate, lambda: lam, regime: Regime::Inverted })
            })
            .collect::<Result<Vec<_>>>()?;
        samples.extend(numeric.iter().copied());

        // knots of the inverted table: exact junction + numeric branch
        let mut xs = vec![mu_junction];
        let mut ys = vec![lam_fs];
        for s in &numeric {
            xs.push(s.mu);
            ys.push(s.lambda);
        }
        let inverted = MonotoneCubic::fit(xs, ys).map_err(|e| {
            CknError::solver(format!("numeric branch is not invertible: {e}"))
        })?;
        let mu_max = numeric.last().map(|s| s.mu).unwrap_or(mu_junction);
        Ok(Self {
            q,
            p,
            manifold: manifold.clone(),
            samples,
            threshold,
            consts,
            inverted,
            mu_junction,
            mu_max,
        })
    }

    /// Largest μ the tabulated curve can serve.
    pub fn mu_max(&self) -> T {
        self.mu_max
    }

    /// The line closed form `Λ_R` at this curve's exponent.
    pub fn closed_forms(&self) -> &KltClosedForms<T> {
        &self.consts
    }

    /// Sharp bound `Λ(μ)`: separated closed form `Λ_R(vol^{-1/q} μ)` up
    /// to the junction, monotone-cubic inversion of the minimized branch
    /// beyond it, an error past the tabulated range. (Between the bracket
    /// bounds of a non-sphere factor the closed form is used up to the
    /// junction sample, which pins the upper bracket bound.)
    pub fn lambda_of_mu(&self, mu: T) -> Result<T> {
        if !mu.is_finite() || mu < T::zero() {
            return Err(CknError::domain(format!("norm must be finite and >= 0, got {mu}")));
        }
        if mu == T::zero() {
            return Ok(T::zero());
        }
        if mu <= self.mu_junction {
            let scaled = self.manifold.vol.powf(-T::one() / self.q) * mu;
            return Ok(self.consts.lambda_r(scaled));
        }
        if mu > self.mu_max {
            return Err(CknError::domain(format!(
                "μ = {mu} beyond the tabulated range (max {})",
                self.mu_max
            )));
        }
        Ok(self.inverted.eval(mu))
    }

    /// Log-log slope `d ln Λ / d ln μ` across the last two samples: a
    /// report-only diagnostic of the superlinear growth at the high end
    /// (the asymptotic constant itself is out of scope).
    pub fn tail_slope(&self) -> Option<T> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let (a, b) = (&self.samples[n - 2], &self.samples[n - 1]);
        Some((b.lambda.ln() - a.lambda.ln()) / (b.mu.ln() - a.mu.ln()))
    }
}

/// Outcome of one line-bound check.
#[derive(Debug, Clone, Copy)]
pub struct KltCheck<T = f64> {
    /// Numerically computed `λ₁[V]` (zero when the operator has no bound
    /// state below the continuum edge).
    pub lhs: T,
    /// Closed-form `Λ_R(‖V‖_q)` with the norm from grid quadrature.
    pub rhs: T,
    /// `lhs ≤ rhs + 1e-6`.
    pub ok: bool,
    /// Ground state leaned on the domain truncation; the check is then a
    /// confined (safe-side) surrogate of the whole-line problem.
    pub edge_flagged: bool,
}

/// Check the one-dimensional bound `λ₁[V] ≤ Λ_R(‖V‖_q)` for a potential
/// sampled on uniform abscissae `s`. The left side comes from the
/// tridiagonal eigensolver, the right side from the closed form at the
/// trapezoid `L^q` norm, so the two routes are independent.
pub fn klt_check_1d<T: Real>(s: &[T], v: &[T], q: T) -> Result<KltCheck<T>> {
    let consts = KltClosedForms::new(q)?;
    if v.len() != s.len() {
        return Err(CknError::shape(format!(
            "{} potential samples on {} abscissae",
            v.len(),
            s.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite() || *x < T::zero()) {
        return Err(CknError::domain("potential must be finite and nonnegative"));
    }
    let ground = schrodinger_ground(s, v, T::zero())?;
    let lhs = (-ground.energy).max(T::zero());
    let h = s[1] - s[0];
    let vq: Vec<T> = v.iter().map(|&x| x.powf(q)).collect();
    let norm = trapezoid(&vq, h).powf(T::one() / q);
    let rhs = consts.lambda_r(norm);
    Ok(KltCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + T::of(1e-6),
        edge_flagged: ground.edge_flagged,
    })
}

/// Certified Hardy coefficient for a radial potential: the inequality
///
/// ```text
/// ∫|∇u|² − ∫ V |u|²/|x|² ≥ gap · ∫ |u|²/|x|²
/// ```
///
/// holds with `gap = a_c² − Λ(μ)`, `μ = (∫ V^q |x|^{-d} dx)^{1/q}`, for
/// every `u` in the homogeneous Sobolev space. `V` is sampled at the
/// radii `r` (strictly increasing, positive); the μ-integral is a
/// trapezoid sum in `ln r`, which is exactly the line integral of the
/// log-radius profile, and the curve's factor manifold must be the round
/// sphere `S^{d-1}` for the radial reduction to apply.
pub fn hardy_gap<T: Real>(curve: &KltCurve<T>, r: &[T], v: &[T]) -> Result<T> {
    if r.len() != v.len() || r.len() < 2 {
        return Err(CknError::shape(format!(
            "{} potential samples at {} radii (need >= 2, equal lengths)",
            v.len(),
            r.len()
        )));
    }
    if r.windows(2).any(|w| !(w[1] > w[0])) || !(r[0] > T::zero()) {
        return Err(CknError::domain("radii must be positive and strictly increasing"));
    }
    if v.iter().any(|x| !x.is_finite() || *x < T::zero()) {
        return Err(CknError::domain("potential must be finite and nonnegative"));
    }
    if !curve.manifold.is_sphere {
        return Err(CknError::domain(
            "the radial reduction needs a sphere cross-section",
        ));
    }
    let q = curve.q;
    let mut integral = T::zero();
    for i in 0..r.len() - 1 {
        let ds = (r[i + 1] / r[i]).ln();
        integral += T::half() * (v[i].powf(q) + v[i + 1].powf(q)) * ds;
    }
    let mu = (curve.manifold.vol * integral).powf(T::one() / q);
    let d = T::of_usize((curve.manifold.dim + 1) as usize);
    let a_c = T::half() * (d - T::two());
    Ok(a_c * a_c - curve.lambda_of_mu(mu)?)
}
