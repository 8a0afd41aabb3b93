//! Direct variational minimization of the interpolation quotient on the
//! flat cylinder, and the symmetry-breaking sweep built on top of it.
//!
//! On a grid with the plain product measure `ds dv_g` the quotient
//!
//! ```text
//! Q[φ] = (‖∂_s φ‖² + ‖∇_ω φ‖² + Λ‖φ‖²) / ‖φ‖_p²
//! ```
//!
//! has the explicit symmetric candidate [`symmetric_profile`], whose value
//! is the closed-form constant `μ⋆(Λ)`. Below the threshold `Λ_FS` the
//! candidate is the global minimizer; above it the quotient dips strictly
//! below `μ⋆` along angular mode-1 perturbations. [`Minimizer`] descends
//! the quotient with an `(−Δ + Λ)⁻¹`-preconditioned projected gradient
//! iteration and reports where its output sits relative to the symmetric
//! branch; [`bifurcation_sweep`] repeats that over a Λ-grid and localizes
//! the empirical onset of symmetry breaking.
//!
//! Discrete design notes:
//!
//! * all energies are face sums, and the discrete operator `A = −Δ_h + Λ`
//!   used in gradients, residuals and the preconditioner is their exact
//!   summation-by-parts counterpart, so the computed gradient is the exact
//!   gradient of the computed quotient (validated against finite
//!   differences in the tests);
//! * positivity is enforced by the `|φ|` projection, admissible because
//!   every term of the quotient is even in `φ` and the face energies can
//!   only decrease under it;
//! * the translation degeneracy along `s` is pinned by shifting the
//!   `|φ|^p`-mass center to the nearest grid node of `s = 0` after every
//!   accepted step, so runs are comparable and bit-deterministic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::closed_forms::{mu_star, CknParams, ManifoldData};
use crate::error::{CknError, Result};
use crate::grid::{
    random_compact_field, AngularKind, AngularRes, CylinderGrid, Field, GridConfig, MeasureKind,
};
use crate::linalg::Banded;
use crate::scalar::Real;

/// The explicit symmetric optimizer of the quotient at the grid's `(p, Λ)`:
/// `β cosh(α s)^{-2/(p-2)}` with `α = (p-2)√Λ/2` and `β = (pΛ/2)^{1/(p-2)}`.
/// Evaluated through `log cosh` so large `|s|` cannot overflow.
pub fn symmetric_profile<T: Real>(params: &CknParams<T>, s: T) -> T {
    let p = params.p;
    let x = (params.alpha * s).abs();
    // ln cosh x = x + ln1p(e^{-2x}) - ln 2
    let ln_cosh = x + (-(T::two()) * x).exp().ln_1p() - T::two().ln();
    let ln_beta = (T::half() * p * params.lambda).ln() / (p - T::two());
    (ln_beta - T::two() / (p - T::two()) * ln_cosh).exp()
}

fn require_flat(grid: &CylinderGrid<impl Real>) -> Result<()> {
    if grid.measure != MeasureKind::Cylinder {
        return Err(CknError::domain(
            "the variational quotient lives on the flat cylinder measure; \
             build the grid with CylinderGrid::cylinder",
        ));
    }
    Ok(())
}

fn require_usable<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Result<()> {
    require_flat(grid)?;
    phi.matches(grid)?;
    if !phi.is_finite() {
        return Err(CknError::domain("field has non-finite entries"));
    }
    Ok(())
}

/// The additive pieces of the quotient, all exact face/cell sums.
struct EnergyParts<T> {
    ds: T,
    angular: T,
    l2_sq: T,
    /// ∫ |φ|^p dν (the p-th power, not the norm).
    lp_p: T,
}

fn energy_parts<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> EnergyParts<T> {
    let nw = grid.angular.n_omega;
    let h = grid.h;
    let w = &grid.angular.weights;
    let p = grid.params.p;
    let (mut ds, mut ang, mut l2, mut lp) = (T::zero(), T::zero(), T::zero(), T::zero());
    for i in 0..grid.n_s {
        let row = phi.row(i);
        ang += grid.angular.face_pairing(row, row);
        for j in 0..nw {
            l2 += w[j] * row[j] * row[j];
            lp += w[j] * row[j].abs().powf(p);
        }
        if i + 1 < grid.n_s {
            let next = phi.row(i + 1);
            for j in 0..nw {
                let d = next[j] - row[j];
                ds += w[j] * d * d;
            }
        }
    }
    EnergyParts {
        ds: ds / h,
        angular: ang * grid.angular.energy_scale * h,
        l2_sq: l2 * h,
        lp_p: lp * h,
    }
}

/// `(‖∂_sφ‖² + ‖∇_ωφ‖² + Λ‖φ‖²) / ‖φ‖_p²` on the flat cylinder measure.
pub fn rayleigh_quotient<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Result<T> {
    require_usable(grid, phi)?;
    let e = energy_parts(grid, phi);
    if !(e.lp_p > T::zero()) {
        return Err(CknError::domain("quotient of the zero field"));
    }
    let p = grid.params.p;
    Ok((e.ds + e.angular + grid.params.lambda * e.l2_sq) / e.lp_p.powf(T::two() / p))
}

/// The deficit functional `‖∂_sφ‖² + ‖∇_ωφ‖² + Λ‖φ‖² − μ⋆(Λ)‖φ‖_p²`,
/// with `μ⋆` taken from the closed form. Nonnegative for every field iff
/// the symmetric branch is the true optimum at this `Λ`.
pub fn functional_g<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Result<T> {
    require_usable(grid, phi)?;
    let e = energy_parts(grid, phi);
    let p = grid.params.p;
    let ms = mu_star(p, grid.manifold.vol, grid.params.lambda)?;
    Ok(e.ds + e.angular + grid.params.lambda * e.l2_sq - ms * e.lp_p.powf(T::two() / p))
}

/// One coefficient walk of `A = −∂²_s − Δ_ω + Λ` on the flat cylinder
/// (no-flux rows at the s-ends): single source of truth for the
/// matrix-free apply and the banded preconditioner factorization.
fn for_each_a_coeff<T: Real>(grid: &CylinderGrid<T>, mut visit: impl FnMut(usize, usize, T)) {
    let nw = grid.angular.n_omega;
    let inv_h2 = T::one() / (grid.h * grid.h);
    let lam = grid.params.lambda;
    let ang = &grid.angular;
    for i in 0..grid.n_s {
        let base = i * nw;
        for j in 0..nw {
            let r = base + j;
            let mut diag = lam;
            if i > 0 {
                diag += inv_h2;
                visit(r, r - nw, -inv_h2);
            }
            if i + 1 < grid.n_s {
                diag += inv_h2;
                visit(r, r + nw, -inv_h2);
            }
            match ang.kind {
                AngularKind::SymmetricOnly => {}
                AngularKind::Circle => {
                    let jp = if j + 1 == nw { 0 } else { j + 1 };
                    let jm = if j == 0 { nw - 1 } else { j - 1 };
                    let es = ang.energy_scale / ang.weights[j];
                    diag += es * (ang.face_w[j] + ang.face_w[jm]);
                    visit(r, base + jp, -es * ang.face_w[j]);
                    visit(r, base + jm, -es * ang.face_w[jm]);
                }
                AngularKind::Colatitude => {
                    let inv = T::one() / ang.node_div[j];
                    if j + 1 < nw {
                        diag += inv * ang.face_w[j];
                        visit(r, r + 1, -inv * ang.face_w[j]);
                    }
                    if j > 0 {
                        diag += inv * ang.face_w[j - 1];
                        visit(r, r - 1, -inv * ang.face_w[j - 1]);
                    }
                }
            }
            visit(r, r, diag);
        }
    }
}

/// `A φ` with `A = −∂²_s − Δ_ω + Λ`, the summation-by-parts companion of
/// [`rayleigh_quotient`]'s numerator: `⟨φ, Aφ⟩_ν` equals the numerator
/// exactly, not just to O(h²).
fn apply_a<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Field<T> {
    let mut out = Field::zeros(grid.n_s, grid.angular.n_omega);
    for_each_a_coeff(grid, |r, c, v| {
        out.data[r] += v * phi.data[c];
    });
    out
}

/// L²(dν)-representative of the quotient's first variation:
/// `dQ[φ]·v = ⟨g, v⟩_ν`. Valid at any scale of `φ` (the quotient is
/// homogeneous of degree zero, and so is `g` up to the `1/‖φ‖²` factor).
pub fn quotient_gradient<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Result<Field<T>> {
    require_usable(grid, phi)?;
    let e = energy_parts(grid, phi);
    if !(e.lp_p > T::zero()) {
        return Err(CknError::domain("gradient at the zero field"));
    }
    let p = grid.params.p;
    let den = e.lp_p.powf(T::two() / p);
    let q = (e.ds + e.angular + grid.params.lambda * e.l2_sq) / den;
    let pm = e.lp_p.powf(T::two() / p - T::one());
    let a = apply_a(grid, phi);
    let mut g = Field::zeros(grid.n_s, grid.angular.n_omega);
    for (gd, (&av, &ph)) in g.data.iter_mut().zip(a.data.iter().zip(phi.data.iter())) {
        let pterm = ph.abs().powf(p - T::two()) * ph;
        *gd = T::two() / den * (av - q * pm * pterm);
    }
    Ok(g)
}

/// L²(dν) norm of `Aψ − |ψ|^{p-2}ψ` after rescaling `φ` to the
/// normalization in which the optimizer is an exact fixed point:
/// `ψ = μ^{1/(p-2)} φ/‖φ‖_p` with `μ = Q[φ]`.
pub fn el_residual<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Result<T> {
    require_usable(grid, phi)?;
    let p = grid.params.p;
    let q = rayleigh_quotient(grid, phi)?;
    let lp = energy_parts(grid, phi).lp_p.powf(T::one() / p);
    let scale = q.powf(T::one() / (p - T::two())) / lp;
    let psi = phi.map(|x| scale * x);
    let a = apply_a(grid, &psi);
    let mut res = Field::zeros(grid.n_s, grid.angular.n_omega);
    for (rd, (&av, &ps)) in res.data.iter_mut().zip(a.data.iter().zip(psi.data.iter())) {
        *rd = av - ps.abs().powf(p - T::two()) * ps;
    }
    grid.norm_l2(&res)
}

/// Fraction of `‖φ‖²_ν` carried by the angular mean: 1 for symmetric
/// fields, strictly smaller as soon as angular structure appears.
/// Translation-invariant, which is what makes it a robust detector.
pub fn symmetric_fraction<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Result<T> {
    require_usable(grid, phi)?;
    let e = energy_parts(grid, phi);
    if !(e.l2_sq > T::zero()) {
        return Err(CknError::domain("symmetric fraction of the zero field"));
    }
    let vol = grid.manifold.vol;
    let w = &grid.angular.weights;
    let mut num = T::zero();
    for i in 0..grid.n_s {
        let row = phi.row(i);
        let mean = row.iter().zip(w.iter()).map(|(&x, &wj)| x * wj).sum::<T>() / vol;
        num += mean * mean;
    }
    Ok(num * grid.h * vol / e.l2_sq)
}

/// Discrete samples of the first angular eigenfunctions, orthogonalized
/// against constants and normalized in the cross-section inner product.
/// Circle: the two first harmonics; colatitude: the axisymmetric `cos θ`;
/// symmetric-only grids have none.
fn mode1_basis<T: Real>(grid: &CylinderGrid<T>) -> Vec<Vec<T>> {
    let ang = &grid.angular;
    let raw: Vec<Vec<T>> = match ang.kind {
        AngularKind::SymmetricOnly => Vec::new(),
        AngularKind::Circle => {
            let k1 = T::two() * T::PI() / grid.manifold.vol;
            vec![
                ang.nodes.iter().map(|&t| (k1 * t).cos()).collect(),
                ang.nodes.iter().map(|&t| (k1 * t).sin()).collect(),
            ]
        }
        AngularKind::Colatitude => vec![ang.nodes.iter().map(|&t| t.cos()).collect()],
    };
    let vol = grid.manifold.vol;
    raw.into_iter()
        .map(|mut b| {
            let mean = b.iter().zip(ang.weights.iter()).map(|(&x, &w)| x * w).sum::<T>() / vol;
            for x in b.iter_mut() {
                *x -= mean;
            }
            let nrm = b
                .iter()
                .zip(ang.weights.iter())
                .map(|(&x, &w)| w * x * x)
                .sum::<T>()
                .sqrt();
            for x in b.iter_mut() {
                *x /= nrm;
            }
            b
        })
        .collect()
}

/// Relative weight of the first angular eigenspace in `φ`:
/// `‖P₁φ‖_ν/‖φ‖_ν ∈ [0, 1]`. Zero on symmetric-only grids.
pub fn mode1_amplitude<T: Real>(grid: &CylinderGrid<T>, phi: &Field<T>) -> Result<T> {
    require_usable(grid, phi)?;
    let e = energy_parts(grid, phi);
    if !(e.l2_sq > T::zero()) {
        return Err(CknError::domain("mode-1 amplitude of the zero field"));
    }
    let w = &grid.angular.weights;
    let mut num = T::zero();
    for b in mode1_basis(grid) {
        for i in 0..grid.n_s {
            let row = phi.row(i);
            let c = row
                .iter()
                .zip(b.iter().zip(w.iter()))
                .map(|(&x, (&bj, &wj))| wj * x * bj)
                .sum::<T>();
            num += c * c;
        }
    }
    Ok((num * grid.h / e.l2_sq).sqrt())
}

/// Starting point for [`Minimizer::minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// The sampled symmetric optimizer. The iteration preserves symmetry,
    /// so this converges to the symmetric critical point at every `Λ`.
    Symmetric,
    /// Symmetric optimizer plus a mode-1 perturbation along the
    /// instability direction `φ^{p/2}·(first angular eigenfunction)`.
    Mode1Perturbed,
    /// Symmetric optimizer modulated by a seeded smooth random field.
    Random,
}

/// Options for one quotient descent.
#[derive(Debug, Clone)]
pub struct MinimizeConfig<T = f64> {
    pub init: InitKind,
    pub seed: u64,
    /// Relative amplitude of the initial perturbation (mode-1 and random
    /// inits; ignored for symmetric starts).
    pub perturbation: T,
    pub max_iters: usize,
    /// Convergence target for the relative Euler–Lagrange residual
    /// `‖Aψ − ψ^{p-1}‖/‖ψ‖`; must be ≤ 1e-5 so that a converged run
    /// certifies the residual bound it reports.
    pub tol: T,
}

impl<T: Real> MinimizeConfig<T> {
    pub fn new(init: InitKind) -> Self {
        Self { init, seed: 0, perturbation: T::of(0.1), max_iters: 4000, tol: T::of(5e-7) }
    }
}

/// Outcome of one descent. `minimizer` is nonnegative, `‖·‖_p = 1`
/// normalized and recentered; `mu_estimate` is its quotient value.
#[derive(Debug, Clone)]
pub struct MinimizeResult<T = f64> {
    pub mu_estimate: T,
    pub minimizer: Field<T>,
    pub symmetric_fraction: T,
    pub mode1_amplitude: T,
    /// Residual of the rescaled Euler–Lagrange equation at the output.
    pub el_residual: T,
    /// L²(dν) norm of the rescaled output, the reference scale for
    /// `el_residual`.
    pub el_scale: T,
    pub iterations: usize,
    pub converged: bool,
    /// Closed-form symmetric value `μ⋆(Λ)` for comparison.
    pub mu_star: T,
    /// Quotient of the raw initial guess (before projection); the descent
    /// output never exceeds it.
    pub initial_quotient: T,
}

/// Preconditioned projected-gradient descent for the quotient on one grid.
/// Holds a banded LU factorization of `A = −Δ_h + Λ`, reused across
/// iterations; construction cost is one factorization.
pub struct Minimizer<'g, T: Real = f64> {
    pub grid: &'g CylinderGrid<T>,
    mu_star: T,
    lu: Banded<T>,
}

impl<'g, T: Real> Minimizer<'g, T> {
    pub fn new(grid: &'g CylinderGrid<T>) -> Result<Self> {
        require_flat(grid)?;
        let nw = grid.angular.n_omega;
        let nn = grid.n_s * nw;
        let mut mat = Banded::zeros(nn, nw);
        for_each_a_coeff(grid, |r, c, v| mat.add(r, c, v));
        mat.lu_in_place()?;
        let mu_star = mu_star(grid.params.p, grid.manifold.vol, grid.params.lambda)?;
        Ok(Self { grid, mu_star, lu: mat })
    }

    /// `μ⋆(Λ)` for this grid's parameters.
    pub fn mu_star(&self) -> T {
        self.mu_star
    }

    fn initial_field(&self, cfg: &MinimizeConfig<T>) -> Result<Field<T>> {
        let grid = self.grid;
        let params = &grid.params;
        let base = Field::from_fn(grid, |s, _| symmetric_profile(params, s));
        match cfg.init {
            InitKind::Symmetric => Ok(base),
            InitKind::Mode1Perturbed => {
                let basis = mode1_basis(grid);
                let dir = basis.first().ok_or_else(|| {
                    CknError::domain(
                        "mode-1 perturbed start needs an angular cross-section \
                         (the grid is symmetric-only)",
                    )
                })?;
                let half_p = T::half() * params.p;
                let mut f = base;
                for i in 0..grid.n_s {
                    let amp = cfg.perturbation * f.at(i, 0).powf(half_p);
                    for j in 0..grid.angular.n_omega {
                        *f.at_mut(i, j) += amp * dir[j];
                    }
                }
                Ok(f)
            }
            InitKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let bump = random_compact_field(grid, &mut rng);
                let peak = bump.data.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
                let scale =
                    if peak > T::zero() { cfg.perturbation / peak } else { T::zero() };
                let mut f = base;
                for (fd, &bd) in f.data.iter_mut().zip(bump.data.iter()) {
                    *fd *= T::one() + scale * bd;
                }
                Ok(f)
            }
        }
    }

    /// `|φ|`, then `‖φ‖_p = 1`, then recenter the `|φ|^p` mass to the
    /// node nearest `s = 0`. Returns the projected field.
    fn project(&self, f: &Field<T>) -> Result<Field<T>> {
        let grid = self.grid;
        let p = grid.params.p;
        let mut f = f.map(|x| x.abs());
        let e = energy_parts(grid, &f);
        if !(e.lp_p > T::zero()) {
            return Err(CknError::domain("descent collapsed to the zero field"));
        }
        let inv = T::one() / e.lp_p.powf(T::one() / p);
        for x in f.data.iter_mut() {
            *x *= inv;
        }
        // |φ|^p mass center of the normalized field
        let nw = grid.angular.n_omega;
        let w = &grid.angular.weights;
        let mut sbar = T::zero();
        for i in 0..grid.n_s {
            let row = f.row(i);
            let m: T = row.iter().zip(w.iter()).map(|(&x, &wj)| wj * x.powf(p)).sum();
            sbar += grid.s[i] * m;
        }
        sbar *= grid.h;
        let k = (sbar / grid.h).round().to_isize().ok_or_else(|| {
            CknError::solver(format!("recentering offset {sbar} is not representable"))
        })?;
        if k == 0 {
            return Ok(f);
        }
        let n_s = grid.n_s as isize;
        let mut shifted = Field::zeros(grid.n_s, nw);
        for i in 0..grid.n_s {
            let src = (i as isize + k).clamp(0, n_s - 1) as usize;
            shifted.data[i * nw..(i + 1) * nw].copy_from_slice(f.row(src));
        }
        Ok(shifted)
    }

    /// Quotient value of a projected iterate (‖φ‖_p = 1, so the quotient
    /// is just the numerator).
    fn objective(&self, f: &Field<T>) -> T {
        let e = energy_parts(self.grid, f);
        e.ds + e.angular + self.grid.params.lambda * e.l2_sq
    }

    /// Gradient at a projected iterate and its relative residual
    /// `‖g‖/(2‖φ‖)`, which equals `el_residual/‖ψ‖` exactly.
    fn gradient(&self, f: &Field<T>, q: T) -> (Field<T>, T) {
        let grid = self.grid;
        let p = grid.params.p;
        let a = apply_a(grid, f);
        let mut g = Field::zeros(grid.n_s, grid.angular.n_omega);
        for (gd, (&av, &ph)) in g.data.iter_mut().zip(a.data.iter().zip(f.data.iter())) {
            *gd = T::two() * (av - q * ph.abs().powf(p - T::two()) * ph);
        }
        let gn = grid.norm_l2(&g).unwrap_or(T::infinity());
        let fn_ = grid.norm_l2(f).unwrap_or(T::one());
        (g, gn / (T::two() * fn_))
    }

    /// Run the descent. Non-convergence within `max_iters` (or a stall of
    /// the backtracking line search) reports the best iterate so far with
    /// `converged = false`; it is not an error.
    pub fn minimize(&self, cfg: &MinimizeConfig<T>) -> Result<MinimizeResult<T>> {
        if !(cfg.tol > T::zero()) || cfg.tol > T::of(1e-5) {
            return Err(CknError::domain(format!(
                "tolerance must lie in (0, 1e-5], got {:e}",
                cfg.tol
            )));
        }
        if cfg.max_iters == 0 {
            return Err(CknError::domain("max_iters must be positive"));
        }
        if !cfg.perturbation.is_finite() || cfg.perturbation < T::zero() {
            return Err(CknError::domain("perturbation must be finite and nonnegative"));
        }
        let grid = self.grid;
        let raw = self.initial_field(cfg)?;
        let initial_quotient = rayleigh_quotient(grid, &raw)?;
        let mut phi = self.project(&raw)?;
        let mut q = self.objective(&phi);
        let mut tau = T::one();
        let mut iterations = 0usize;
        let mut converged = false;
        for _ in 0..cfg.max_iters {
            let (g, rel) = self.gradient(&phi, q);
            if rel <= cfg.tol {
                converged = true;
                break;
            }
            let mut d = g.data.clone();
            self.lu.lu_solve(&mut d);
            let mut t = tau;
            let mut accepted = false;
            for _ in 0..60 {
                let mut cand = phi.clone();
                for (cd, &dd) in cand.data.iter_mut().zip(d.iter()) {
                    *cd -= t * dd;
                }
                let cand = self.project(&cand)?;
                let qc = self.objective(&cand);
                if qc < q {
                    phi = cand;
                    q = qc;
                    tau = (t * T::of(1.25)).min(T::of(4.0));
                    accepted = true;
                    break;
                }
                t *= T::half();
            }
            if !accepted {
                break; // line-search stall; the final residual check decides
            }
            iterations += 1;
        }
        if !converged {
            let (_, rel) = self.gradient(&phi, q);
            converged = rel <= cfg.tol;
        }
        let p = grid.params.p;
        let el_scale = q.powf(T::one() / (p - T::two())) * grid.norm_l2(&phi)?;
        Ok(MinimizeResult {
            mu_estimate: q,
            symmetric_fraction: symmetric_fraction(grid, &phi)?,
            mode1_amplitude: mode1_amplitude(grid, &phi)?,
            el_residual: el_residual(grid, &phi)?,
            el_scale,
            minimizer: phi,
            iterations,
            converged,
            mu_star: self.mu_star,
            initial_quotient,
        })
    }
}

/// Shared grid shape for every point of a [`bifurcation_sweep`].
#[derive(Debug, Clone)]
pub struct SweepGridSpec<T = f64> {
    pub s_half: T,
    pub n_s: usize,
    pub angular: AngularRes,
    /// Passed through to the grid builder; the sweep fails on Λ values
    /// whose optimizer the interval cannot hold at this tolerance.
    pub truncation_tol: T,
}

impl<T: Real> SweepGridSpec<T> {
    pub fn new(s_half: T, n_s: usize, angular: AngularRes) -> Self {
        Self { s_half, n_s, angular, truncation_tol: T::of(1e-10) }
    }
}

/// One row of the sweep's branch table.
#[derive(Debug, Clone, Copy)]
pub struct BranchPoint<T = f64> {
    pub lambda: T,
    pub mu_num: T,
    pub mu_star: T,
    pub sym_fraction: T,
    pub mode1_amp: T,
    pub el_residual: T,
    pub converged: bool,
    /// Three times the discretization error of the symmetric value on
    /// this grid; `mu_star - mu_num` must clear it to call the point
    /// broken.
    pub margin: T,
}

impl<T: Real> BranchPoint<T> {
    /// Whether this point sits strictly below the symmetric branch by
    /// more than the discretization margin.
    pub fn broken(&self) -> bool {
        self.converged && self.mu_star - self.mu_num > self.margin
    }
}

/// Symmetry-breaking sweep over a Λ-grid (given in increasing order).
#[derive(Debug, Clone)]
pub struct BranchTable<T = f64> {
    pub points: Vec<BranchPoint<T>>,
    /// Smallest sampled Λ at which the quotient drops below the
    /// symmetric value by more than the margin; `None` if no sampled
    /// point broke.
    pub onset: Option<T>,
}

/// Minimize the quotient at each `lambdas[k]` (mode-1 perturbed starts,
/// concurrently across points) and tabulate the branch against the
/// closed-form symmetric value. Per-point non-convergence is recorded in
/// the table; the sweep itself only fails on invalid parameters.
pub fn bifurcation_sweep<T: Real>(
    d: u32,
    p: T,
    manifold: &ManifoldData<T>,
    lambdas: &[T],
    spec: &SweepGridSpec<T>,
    base: &MinimizeConfig<T>,
) -> Result<BranchTable<T>> {
    if lambdas.is_empty() {
        return Err(CknError::domain("empty Λ grid"));
    }
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CknError::domain("Λ grid must be strictly increasing"));
    }
    let points = lambdas
        .par_iter()
        .map(|&lam| {
            let params = CknParams::from_cylinder(d, p, lam)?;
            let grid = CylinderGrid::build(GridConfig {
                params,
                manifold: manifold.clone(),
                s_min: -spec.s_half,
                s_max: spec.s_half,
                n_s: spec.n_s,
                angular: spec.angular,
                measure: MeasureKind::Cylinder,
                truncation_tol: spec.truncation_tol,
            })?;
            let min = Minimizer::new(&grid)?;
            let mut cfg = base.clone();
            cfg.init = InitKind::Mode1Perturbed;
            let run = min.minimize(&cfg)?;
            let sym = Field::from_fn(&grid, |s, _| symmetric_profile(&grid.params, s));
            let q_sym = rayleigh_quotient(&grid, &sym)?;
            let margin =
                T::of(3.0) * (q_sym - run.mu_star).abs() + T::of(1e-12) * run.mu_star;
            Ok(BranchPoint {
                lambda: lam,
                mu_num: run.mu_estimate,
                mu_star: run.mu_star,
                sym_fraction: run.symmetric_fraction,
                mode1_amp: run.mode1_amplitude,
                el_residual: run.el_residual,
                converged: run.converged,
                margin,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let onset = points.iter().find(|pt| pt.broken()).map(|pt| pt.lambda);
    Ok(BranchTable { points, onset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::{lambda_fs, ManifoldData};

    fn params_pl(lambda: f64) -> CknParams<f64> {
        CknParams::from_cylinder(2, 4.0, lambda).unwrap()
    }

    fn circle() -> ManifoldData<f64> {
        ManifoldData::sphere(1).unwrap()
    }

    fn grid_1d(n_s: usize, s_half: f64, lambda: f64) -> CylinderGrid<f64> {
        CylinderGrid::cylinder(params_pl(lambda), circle(), s_half, n_s, AngularRes::SymmetricOnly)
            .unwrap()
    }

    fn grid_circle(n_s: usize, n_omega: usize, s_half: f64, lambda: f64) -> CylinderGrid<f64> {
        CylinderGrid::cylinder(
            params_pl(lambda),
            circle(),
            s_half,
            n_s,
            AngularRes::Circle { n_omega },
        )
        .unwrap()
    }

    fn profile_field(grid: &CylinderGrid<f64>) -> Field<f64> {
        Field::from_fn(grid, |s, _| symmetric_profile(&grid.params, s))
    }

    #[test]
    fn symmetric_profile_attains_the_sharp_quotient() {
        let grid = grid_1d(32768, 58.0, 1.0 / 6.0);
        let phi = profile_field(&grid);
        let q = rayleigh_quotient(&grid, &phi).unwrap();
        let mu = mu_star(4.0, circle().vol, 1.0 / 6.0).unwrap();
        assert!(
            ((q - mu) / mu).abs() <= 1e-6,
            "quotient {q} vs closed form {mu}, rel {:e}",
            (q - mu) / mu
        );
        // translation by a whole number of cells changes nothing but
        // far-tail rows that carry ~e^{-41} of the mass
        let s0 = 100.0 * grid.h;
        let shifted = Field::from_fn(&grid, |s, _| symmetric_profile(&grid.params, s - s0));
        let qt = rayleigh_quotient(&grid, &shifted).unwrap();
        assert!(((qt - q) / q).abs() <= 1e-10, "translation moved the quotient: {:e}", qt - q);
        // homogeneity degree zero
        let qs = rayleigh_quotient(&grid, &phi.map(|x| 2.7 * x)).unwrap();
        assert!(((qs - q) / q).abs() <= 1e-12);
    }

    #[test]
    fn evaluators_validate_their_inputs() {
        let grid = grid_circle(128, 8, 58.0, 1.0 / 6.0);
        let zero = Field::zeros(grid.n_s, grid.angular.n_omega);
        assert!(rayleigh_quotient(&grid, &zero).is_err());
        assert!(quotient_gradient(&grid, &zero).is_err());
        let wrong = Field::zeros(grid.n_s + 1, grid.angular.n_omega);
        assert!(functional_g(&grid, &wrong).is_err());
        let mut bad = profile_field(&grid);
        bad.data[7] = f64::NAN;
        assert!(el_residual(&grid, &bad).is_err());
        // the quotient lives on the flat measure only
        let wgrid = CylinderGrid::weighted(
            params_pl(1.0 / 6.0),
            circle(),
            -58.0,
            58.0,
            128,
            AngularRes::Circle { n_omega: 8 },
        )
        .unwrap();
        let f = Field::zeros(wgrid.n_s, wgrid.angular.n_omega).map(|_| 1.0);
        assert!(rayleigh_quotient(&wgrid, &f).is_err());
        assert!(Minimizer::new(&wgrid).is_err());
        // symmetric-only grids cannot host a mode-1 start
        let g1 = grid_1d(128, 58.0, 1.0 / 6.0);
        let m1 = Minimizer::new(&g1).unwrap();
        assert!(m1.minimize(&MinimizeConfig::new(InitKind::Mode1Perturbed)).is_err());
    }

    #[test]
    fn deficit_functional_vanishes_at_the_optimizer_and_rises_off_it() {
        let grid = grid_1d(16384, 58.0, 1.0 / 6.0);
        let phi = profile_field(&grid);
        let l2 = grid.inner(&phi, &phi).unwrap();
        let g0 = functional_g(&grid, &phi).unwrap();
        assert!(g0.abs() <= 1e-6 * l2, "deficit at the optimizer: {g0:e} vs scale {l2:e}");
        // the deficit is exactly 2-homogeneous, so scalar rescaling stays
        // on the zero set ...
        for c in [0.5, 2.0] {
            let g = functional_g(&grid, &phi.map(|x| c * x)).unwrap();
            assert!(
                (g - c * c * g0).abs() <= 1e-10 * l2,
                "homogeneity broke at scale {c}: {g:e} vs {:e}",
                c * c * g0
            );
        }
        // ... while dilations leave the optimal orbit and pay for the
        // mismatched c, 1/c, c^{-2/p} homogeneities of the three terms
        for c in [0.5, 2.0] {
            let squeezed =
                Field::from_fn(&grid, |s, _| symmetric_profile(&grid.params, c * s));
            let g = functional_g(&grid, &squeezed).unwrap();
            assert!(g > 0.01 * l2, "deficit of the {c}-dilated profile: {g:e}");
        }
    }

    #[test]
    fn quotient_gradient_matches_finite_differences() {
        use rand::Rng;
        let grid = grid_circle(128, 8, 58.0, 1.0 / 6.0);
        // deliberately unnormalized base point with angular structure
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let bump = random_compact_field(&grid, &mut rng);
        let mut base = profile_field(&grid);
        for (bd, &pd) in base.data.iter_mut().zip(bump.data.iter()) {
            *bd = 1.7 * (*bd + 0.25 * pd.abs() + 0.01 * pd);
        }
        let g = quotient_gradient(&grid, &base).unwrap();
        let eps = 1e-6;
        for _ in 0..20 {
            let dir = random_compact_field(&grid, &mut rng);
            let scale = (0.5 + rng.gen::<f64>())
                / dir.data.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let dir = dir.map(|x| x * scale);
            let mut plus = base.clone();
            let mut minus = base.clone();
            for ((pd, md), &dd) in
                plus.data.iter_mut().zip(minus.data.iter_mut()).zip(dir.data.iter())
            {
                *pd += eps * dd;
                *md -= eps * dd;
            }
            let fd = (rayleigh_quotient(&grid, &plus).unwrap()
                - rayleigh_quotient(&grid, &minus).unwrap())
                / (2.0 * eps);
            let an = grid.inner(&g, &dir).unwrap();
            assert!(
                (fd - an).abs() <= 1e-6 * fd.abs().max(1e-3),
                "directional derivative {an:e} vs centered difference {fd:e}"
            );
        }
    }

    #[test]
    fn el_residual_is_second_order_and_exact_on_constants() {
        let res_at = |n_s: usize| -> f64 {
            let grid = grid_1d(n_s, 58.0, 1.0 / 6.0);
            el_residual(&grid, &profile_field(&grid)).unwrap()
        };
        let coarse = res_at(2048);
        let fine = res_at(4096);
        let order = (coarse / fine).log2();
        assert!(
            (1.7..=2.3).contains(&order),
            "residual {coarse:e} -> {fine:e}, order {order:.2}"
        );
        // constant plug-in: every Laplacian row kills constants exactly,
        // so the raw equation misfit of φ ≡ 1 is |Λ - 1|·‖1‖ to roundoff
        let grid = grid_1d(1024, 58.0, 1.0 / 6.0);
        let one = Field::zeros(grid.n_s, grid.angular.n_omega).map(|_| 1.0);
        let a = apply_a(&grid, &one);
        let misfit = a.map(|x| x - 1.0);
        let got = grid.norm_l2(&misfit).unwrap();
        let expected = (grid.params.lambda - 1.0).abs() * grid.norm_l2(&one).unwrap();
        assert!(
            ((got - expected) / expected).abs() <= 1e-13,
            "constant-field misfit {got:e} vs exact {expected:e}"
        );
        // the EL rescaling sends any constant onto the exact constant
        // solution Λ^{1/(p-2)}, so the rescaled residual vanishes
        let scale = grid.params.lambda.sqrt() * grid.norm_l2(&one).unwrap();
        let rescaled = el_residual(&grid, &one).unwrap();
        assert!(
            rescaled <= 1e-12 * scale,
            "rescaled constant residual {rescaled:e} vs field scale {scale:e}"
        );
    }

    #[test]
    fn second_variation_coefficient_matches_the_closed_form() {
        // The deficit's curvature along φ^{p/2}·(first harmonic) equals
        // ‖φ‖_p^p (λ₁ − (p²−4)Λ/4): positive below the threshold,
        // negative above.
        let lam_fs = lambda_fs(4.0, 1.0).unwrap();
        for (lam, expect_sign) in [(0.8 * lam_fs, 1.0), (1.25 * lam_fs, -1.0)] {
            let grid = grid_circle(4096, 16, 58.0, lam);
            let phi = profile_field(&grid);
            let basis = mode1_basis(&grid);
            let dir = &basis[0];
            let p = grid.params.p;
            let make = |eps: f64| -> Field<f64> {
                let mut f = phi.clone();
                for i in 0..grid.n_s {
                    let amp = eps * f.at(i, 0).powf(0.5 * p);
                    for j in 0..grid.angular.n_omega {
                        *f.at_mut(i, j) += amp * dir[j];
                    }
                }
                f
            };
            let eps = 1e-2;
            let g0 = functional_g(&grid, &phi).unwrap();
            let gp = functional_g(&grid, &make(eps)).unwrap();
            let gm = functional_g(&grid, &make(-eps)).unwrap();
            let coef = (gp + gm - 2.0 * g0) / (2.0 * eps * eps);
            // ‖φ_Λ‖_p^p on the line: cylinder integral divided by vol
            let norm_pp =
                grid.integrate(&phi.map(|x| x.powf(p))).unwrap() / grid.manifold.vol;
            let analytic = norm_pp * (grid.manifold.lambda1 - 0.25 * (p * p - 4.0) * lam);
            assert!(
                coef * expect_sign > 0.0,
                "curvature sign at Λ = {lam}: got {coef:e}"
            );
            assert!(
                ((coef - analytic) / analytic).abs() <= 0.03,
                "curvature {coef:e} vs closed form {analytic:e}"
            );
        }
    }

    #[test]
    fn symmetric_start_converges_to_the_profile() {
        let grid = grid_circle(1536, 16, 58.0, 1.0 / 6.0);
        let min = Minimizer::new(&grid).unwrap();
        let r = min.minimize(&MinimizeConfig::new(InitKind::Symmetric)).unwrap();
        assert!(r.converged, "no convergence in {} iterations", r.iterations);
        assert!(r.symmetric_fraction >= 1.0 - 1e-12);
        assert!(r.el_residual <= 1e-5 * r.el_scale);
        assert!(r.mu_estimate <= r.initial_quotient);
        assert!(r.mu_estimate <= r.mu_star + 1e-8);
        // cosine similarity with the sampled profile
        let phi = profile_field(&grid);
        let cos = grid.inner(&r.minimizer, &phi).unwrap()
            / (grid.norm_l2(&r.minimizer).unwrap() * grid.norm_l2(&phi).unwrap());
        assert!(cos >= 1.0 - 1e-6, "cosine similarity {cos}");
    }

    #[test]
    fn mode1_start_below_threshold_recovers_symmetry() {
        let grid = grid_circle(3072, 16, 58.0, 1.0 / 6.0);
        let min = Minimizer::new(&grid).unwrap();
        let r = min.minimize(&MinimizeConfig::new(InitKind::Mode1Perturbed)).unwrap();
        assert!(r.converged);
        assert!(
            r.symmetric_fraction > 1.0 - 1e-6,
            "symmetric fraction {:.9}",
            r.symmetric_fraction
        );
        assert!(
            ((r.mu_estimate - r.mu_star) / r.mu_star).abs() <= 1e-4,
            "mu {} vs mu* {} (rel {:e})",
            r.mu_estimate,
            r.mu_star,
            (r.mu_estimate - r.mu_star) / r.mu_star
        );
    }

    #[test]
    fn mode1_start_above_threshold_breaks_symmetry() {
        let grid = grid_circle(1536, 16, 58.0, 0.5);
        let min = Minimizer::new(&grid).unwrap();
        let r = min.minimize(&MinimizeConfig::new(InitKind::Mode1Perturbed)).unwrap();
        assert!(r.converged);
        let phi = profile_field(&grid);
        let margin = 3.0 * (rayleigh_quotient(&grid, &phi).unwrap() - r.mu_star).abs();
        assert!(
            r.mu_star - r.mu_estimate > margin,
            "drop {:e} does not clear the margin {margin:e}",
            r.mu_star - r.mu_estimate
        );
        assert!(r.symmetric_fraction < 0.99, "fraction {}", r.symmetric_fraction);
        assert!(r.mode1_amplitude > 1e-2);
        assert!(r.mu_estimate <= r.mu_star + 1e-8);
    }

    #[test]
    fn symmetric_start_above_threshold_stays_on_the_symmetric_branch() {
        // the symmetric subspace is invariant under the iteration, so the
        // descent converges to the (unstable) symmetric critical point
        let grid = grid_circle(1536, 16, 58.0, 0.5);
        let min = Minimizer::new(&grid).unwrap();
        let r = min.minimize(&MinimizeConfig::new(InitKind::Symmetric)).unwrap();
        assert!(r.converged);
        assert!(r.symmetric_fraction >= 1.0 - 1e-12);
        assert!(((r.mu_estimate - r.mu_star) / r.mu_star).abs() <= 1e-3);
    }

    #[test]
    fn random_start_in_the_rigidity_range_recovers_symmetry() {
        let lam = 0.9 * lambda_fs(4.0, 1.0).unwrap();
        let grid = grid_circle(1024, 12, 58.0, lam);
        let min = Minimizer::new(&grid).unwrap();
        let mut cfg = MinimizeConfig::new(InitKind::Random);
        cfg.seed = 7;
        cfg.perturbation = 0.5;
        let r = min.minimize(&cfg).unwrap();
        assert!(r.converged);
        assert!(r.symmetric_fraction > 1.0 - 1e-5);
        assert!(r.mu_estimate <= r.mu_star + 1e-8);
    }

    #[test]
    fn minimize_is_bit_deterministic() {
        let grid = grid_circle(256, 8, 58.0, 0.5);
        let min = Minimizer::new(&grid).unwrap();
        let mut cfg = MinimizeConfig::new(InitKind::Random);
        cfg.seed = 123;
        cfg.max_iters = 60;
        let a = min.minimize(&cfg).unwrap();
        let b = min.minimize(&cfg).unwrap();
        assert_eq!(a.minimizer.data, b.minimizer.data);
        assert_eq!(a.iterations, b.iterations);
        assert!(a.mu_estimate == b.mu_estimate);
    }

    #[test]
    fn sweep_localizes_the_onset_at_the_threshold() {
        let lam_fs = lambda_fs(4.0, 1.0).unwrap();
        let spacing = 0.25 * lam_fs;
        let lambdas: Vec<f64> = (2..=6).map(|k| k as f64 * spacing).collect();
        let spec = SweepGridSpec::new(58.0, 768, AngularRes::Circle { n_omega: 12 });
        let table = bifurcation_sweep(
            2,
            4.0,
            &circle(),
            &lambdas,
            &spec,
            &MinimizeConfig::new(InitKind::Mode1Perturbed),
        )
        .unwrap();
        let onset = table.onset.expect("no symmetry breaking detected in the sweep");
        assert!(
            (onset - lam_fs).abs() <= spacing + 1e-12,
            "onset {onset} vs threshold {lam_fs} (spacing {spacing})"
        );
        for pt in &table.points {
            assert!(pt.converged, "non-converged point at Λ = {}", pt.lambda);
            assert!(pt.mu_num <= pt.mu_star + 1e-8);
            if pt.lambda < lam_fs - spacing + 1e-12 {
                assert!(
                    pt.mode1_amp < 1e-6,
                    "spurious mode-1 weight {:e} at Λ = {}",
                    pt.mode1_amp,
                    pt.lambda
                );
            }
        }
        // the broken branch grows monotonically over the sampled points
        let amps: Vec<f64> = table
            .points
            .iter()
            .filter(|pt| pt.lambda >= lam_fs - 1e-12)
            .map(|pt| pt.mode1_amp)
            .collect();
        for w in amps.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "mode-1 branch not monotone: {amps:?}");
        }
    }
}
