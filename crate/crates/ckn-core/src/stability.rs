//! Linear stability of the symmetric profile by angular-mode decomposition.
//!
//! On a product cylinder the linearized operator splits into a family of
//! one-dimensional Schrödinger operators `H_k = -d²/ds² + (Λ + λ_k) - V`
//! with `V = (p-1) φ_Λ^{p-2}` and `λ_k` the angular eigenvalues, so a
//! tridiagonal eigensolver replaces any two-dimensional computation. The
//! lowest mode-1 energy changes sign exactly at the symmetry-breaking
//! threshold, which `fs_threshold_numeric` locates without using the closed
//! form.

use crate::closed_forms::{lambda_fs, phi_lambda, CknParams, ManifoldData};
use crate::error::{CknError, Result};
use crate::quad::trapezoid;
use crate::scalar::Real;

/// One eigenpair of the discrete Schrödinger operator, with a flag telling
/// whether the state leans on the domain truncation.
#[derive(Debug, Clone)]
pub struct GroundState<T> {
    /// Rayleigh-quotient eigenvalue of the tridiagonal operator.
    pub energy: T,
    /// Eigenvector on the sample points, normalized so that `Σ ψ² h = 1`.
    pub psi: Vec<T>,
    /// Fraction of `Σ ψ²` carried by the outer 10% of nodes on both ends.
    pub edge_mass_fraction: T,
    /// Raised when `edge_mass_fraction` exceeds 1%: the state is not a
    /// cleanly confined bound state of the truncated problem.
    pub edge_flagged: bool,
}

/// Angular eigenvalue `λ_k` of the round sphere `S^{d-1}` sitting inside
/// ambient dimension `d`, i.e. `k (k + d - 2)`; for `d = 2` this is the
/// circle of length `2π` with `λ_k = k²`.
pub fn sphere_mode_eigenvalue<T: Real>(k: usize, d: u32) -> Result<T> {
    if d < 2 {
        return Err(CknError::domain(format!(
            "ambient dimension {d} has no angular factor"
        )));
    }
    let k = T::of_usize(k);
    Ok(k * (k + T::of_usize(d as usize) - T::two()))
}

fn angular_eigenvalue<T: Real>(manifold: &ManifoldData<T>, k: usize) -> Result<T> {
    if manifold.is_sphere {
        let kk = T::of_usize(k);
        return Ok(kk * (kk + T::of_usize(manifold.dim as usize) - T::one()));
    }
    if manifold.dim == 1 {
        // Circle of length vol: λ_k = (2πk / L)².
        let kk = T::of_usize(k) * T::two() * T::PI() / manifold.vol;
        return Ok(kk * kk);
    }
    // Abstract data only carries λ_0 = 0 and λ_1.
    match k {
        0 => Ok(T::zero()),
        1 => Ok(manifold.lambda1),
        _ => Err(CknError::domain(format!(
            "mode {k} requested but only lambda_1 is known for an abstract manifold"
        ))),
    }
}

/// Number of eigenvalues of the tridiagonal operator strictly below `x`,
/// by the Sturm sequence of the shifted LDLᵀ recurrence.
fn sturm_count<T: Real>(diag: &[T], off2: T, x: T) -> usize {
    let mut count = 0usize;
    let mut q = diag[0] - x;
    let floor = T::epsilon() * (off2 + T::one());
    if q <= T::zero() {
        count += 1;
    }
    for &d in &diag[1..] {
        if q == T::zero() {
            q = floor;
        }
        q = d - x - off2 / q;
        if q <= T::zero() {
            count += 1;
        }
    }
    count
}

/// Solve `(A - x) y = rhs` for the tridiagonal `A = tri(off, diag, off)`
/// with partial pivoting (Gaussian elimination with one fill-in band).
fn shifted_solve<T: Real>(diag: &[T], off: T, x: T, rhs: &mut [T]) -> Result<()> {
    let n = diag.len();
    let mut a: Vec<T> = diag.iter().map(|&d| d - x).collect(); // main
    let mut b = vec![off; n.saturating_sub(1)]; // super
    let mut c = vec![off; n.saturating_sub(1)]; // sub
    let mut f = vec![T::zero(); n.saturating_sub(2)]; // fill-in band
    for i in 0..n - 1 {
        if c[i].abs() > a[i].abs() {
            // Swap rows i and i+1.
            core::mem::swap(&mut a[i], &mut c[i]);
            let t = b[i];
            b[i] = a[i + 1];
            a[i + 1] = t;
            if i + 2 < n {
                f[i] = b[i + 1];
                b[i + 1] = T::zero();
            }
            rhs.swap(i, i + 1);
        }
        if a[i] == T::zero() {
            a[i] = T::epsilon();
        }
        let m = c[i] / a[i];
        a[i + 1] -= m * b[i];
        if i + 2 < n {
            b[i + 1] -= m * f.get(i).copied().unwrap_or(T::zero());
        }
        let r = rhs[i];
        rhs[i + 1] -= m * r;
    }
    if a[n - 1] == T::zero() {
        a[n - 1] = T::epsilon();
    }
    rhs[n - 1] /= a[n - 1];
    if n >= 2 {
        rhs[n - 2] = (rhs[n - 2] - b[n - 2] * rhs[n - 1]) / a[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        let extra = if i < f.len() { f[i] * rhs[i + 2] } else { T::zero() };
        rhs[i] = (rhs[i] - b[i] * rhs[i + 1] - extra) / a[i];
    }
    Ok(())
}

/// `k`-th eigenpair (k = 0 is the ground state) of
/// `H = -d²/ds² + shift - V` on the uniform abscissae `s`, with homogeneous
/// Dirichlet values just outside both ends.
///
/// `v` holds the potential samples `V(s_i)`. The eigenvalue comes from
/// bisection on the Sturm count followed by inverse iteration and a final
/// Rayleigh quotient; the discretization error of the 3-point Laplacian is
/// O(h²), so callers needing tight tolerances refine or extrapolate.
pub fn schrodinger_eigen<T: Real>(s: &[T], v: &[T], shift: T, k: usize) -> Result<GroundState<T>> {
    let n = s.len();
    if n < 8 || v.len() != n {
        return Err(CknError::shape(format!(
            "potential of length {} on {} abscissae (need >= 8, equal lengths)",
            v.len(),
            n
        )));
    }
    if k + 2 > n {
        return Err(CknError::domain(format!("eigenvalue index {k} out of range")));
    }
    let h = s[1] - s[0];
    if !(h > T::zero()) {
        return Err(CknError::domain("abscissae must be increasing"));
    }
    let inv_h2 = T::one() / (h * h);
    let diag: Vec<T> = v.iter().map(|&vi| T::two() * inv_h2 + shift - vi).collect();
    let off = -inv_h2;
    let off2 = inv_h2 * inv_h2;

    // Gershgorin bracket, then bisect until the k-th eigenvalue is pinned.
    let mut lo = diag
        .iter()
        .fold(T::infinity(), |m, &d| if d < m { d } else { m })
        - T::two() * inv_h2;
    let mut hi = diag
        .iter()
        .fold(-T::infinity(), |m, &d| if d > m { d } else { m })
        + T::two() * inv_h2;
    let scale = hi.abs().max(lo.abs()).max(T::one());
    for _ in 0..220 {
        let mid = T::half() * (lo + hi);
        if sturm_count(&diag, off2, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::of(1e-14) * scale {
            break;
        }
    }
    let est = T::half() * (lo + hi);

    // Inverse iteration; the shift is already accurate, so a few sweeps
    // starting from a dealigned vector converge to working precision.
    let mut psi: Vec<T> = (0..n)
        .map(|i| {
            let x = T::of_usize(i + 1) / T::of_usize(n + 1);
            (T::of(1.2) + x).sin() + T::of(0.37) * (T::of(7.3) * x).cos()
        })
        .collect();
    for _ in 0..4 {
        shifted_solve(&diag, off, est, &mut psi)?;
        let norm = psi.iter().map(|&x| x * x).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(CknError::solver("inverse iteration collapsed"));
        }
        for x in psi.iter_mut() {
            *x /= norm;
        }
    }

    // Variational Rayleigh quotient via the energy form (no cancellation).
    let mut energy = T::zero();
    for i in 0..=n {
        let a = if i == 0 { T::zero() } else { psi[i - 1] };
        let b = if i == n { T::zero() } else { psi[i] };
        energy += (b - a) * (b - a) * inv_h2;
    }
    for i in 0..n {
        energy += (shift - v[i]) * psi[i] * psi[i];
    }
    // psi is already l²-normalized.

    let edge = (n / 10).max(1);
    let edge_mass: T = psi[..edge]
        .iter()
        .chain(&psi[n - edge..])
        .map(|&x| x * x)
        .sum();
    let norm_l2_h = (T::one() / h).sqrt();
    for x in psi.iter_mut() {
        *x *= norm_l2_h;
    }
    Ok(GroundState {
        energy,
        psi,
        edge_mass_fraction: edge_mass,
        edge_flagged: edge_mass > T::of(0.01),
    })
}

/// Ground state of `H = -d²/ds² + shift - V`; see [`schrodinger_eigen`].
pub fn schrodinger_ground<T: Real>(s: &[T], v: &[T], shift: T) -> Result<GroundState<T>> {
    schrodinger_eigen(s, v, shift, 0)
}

/// Uniform abscissae for the truncated line `[-s_half, s_half]`.
fn line_nodes<T: Real>(s_half: T, n: usize) -> Vec<T> {
    let h = T::two() * s_half / T::of_usize(n + 1);
    (0..n).map(|i| -s_half + T::of_usize(i + 1) * h).collect()
}

/// Half-width `max(20, 40/α)` used for eigenvalue domains, from the decay
/// rate of the profile's bound states.
fn default_half_width<T: Real>(alpha: T) -> T {
    (T::of(40.0) / alpha).max(T::of(20.0))
}

/// Linearization potential `(p-1) φ_Λ^{p-2} = (p-1)(p/2)Λ sech²(αs)`.
fn linearization_potential<T: Real>(p: T, lambda: T, s: &[T]) -> Vec<T> {
    let alpha = T::half() * (p - T::two()) * lambda.sqrt();
    let amp = (p - T::one()) * T::half() * p * lambda;
    s.iter()
        .map(|&si| {
            let c = (alpha * si).cosh();
            amp / (c * c)
        })
        .collect()
}

/// Mode energy `e_k`: lowest eigenvalue of `H_k`, Richardson-extrapolated
/// over a grid pair so the O(h²) truncation drops to O(h⁴).
fn mode_energy<T: Real>(p: T, lambda: T, lam_k: T, n_base: usize) -> Result<GroundState<T>> {
    let alpha = T::half() * (p - T::two()) * lambda.sqrt();
    let s_half = default_half_width(alpha);
    let coarse = {
        let s = line_nodes(s_half, n_base);
        let v = linearization_potential(p, lambda, &s);
        schrodinger_ground(&s, &v, lambda + lam_k)?
    };
    let s = line_nodes(s_half, 2 * n_base);
    let v = linearization_potential(p, lambda, &s);
    let mut fine = schrodinger_ground(&s, &v, lambda + lam_k)?;
    fine.energy = (T::of(4.0) * fine.energy - coarse.energy) / T::of(3.0);
    fine.edge_flagged = fine.edge_flagged || coarse.edge_flagged;
    Ok(fine)
}

/// One row of a [`SpectralReport`].
#[derive(Debug, Clone)]
pub struct ModeEnergy<T> {
    pub k: usize,
    /// Angular eigenvalue λ_k of the manifold factor.
    pub angular_eigenvalue: T,
    /// Lowest eigenvalue of `H_k`.
    pub energy: T,
    pub edge_flagged: bool,
}

/// Mode-by-mode stability summary of the symmetric profile at `(Λ, p)`.
#[derive(Debug, Clone)]
pub struct SpectralReport<T> {
    pub lambda: T,
    pub p: T,
    pub manifold: ManifoldData<T>,
    pub modes: Vec<ModeEnergy<T>>,
    /// Closed-form instability threshold `4 λ_1 / (p² - 4)`, when defined.
    pub threshold: Option<T>,
}

/// Compute `e_k` for `k = 0..=k_max`.
///
/// The analytic expectation is `e_k = λ_k - (p²-4)Λ/4`: the ground state of
/// `H_0` is generated by `φ_Λ^{p/2}` at energy `-(p²-4)Λ/4` and the modes
/// shift it by `λ_k`.
pub fn mode_spectrum<T: Real>(
    lambda: T,
    p: T,
    manifold: &ManifoldData<T>,
    k_max: usize,
) -> Result<SpectralReport<T>> {
    if !(lambda > T::zero()) || !(p > T::two()) {
        return Err(CknError::domain(format!(
            "mode_spectrum needs lambda > 0 and p > 2, got ({lambda}, {p})"
        )));
    }
    if k_max < 1 {
        return Err(CknError::domain("k_max must be at least 1"));
    }
    let mut modes = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let lam_k = angular_eigenvalue(manifold, k)?;
        let g = mode_energy(p, lambda, lam_k, 3000)?;
        modes.push(ModeEnergy {
            k,
            angular_eigenvalue: lam_k,
            energy: g.energy,
            edge_flagged: g.edge_flagged,
        });
    }
    Ok(SpectralReport {
        lambda,
        p,
        manifold: manifold.clone(),
        modes,
        threshold: lambda_fs(p, manifold.lambda1).ok(),
    })
}

/// Locate the instability threshold numerically: the root of `Λ ↦ e_1(Λ)`
/// by bracket expansion and safeguarded secant steps. Independent of the
/// closed form `4λ_1/(p²-4)` apart from sharing the eigensolver's profile.
pub fn fs_threshold_numeric<T: Real>(p: T, manifold: &ManifoldData<T>) -> Result<T> {
    if !(p > T::two()) {
        return Err(CknError::domain(format!("need p > 2, got {p}")));
    }
    let lam1 = manifold.lambda1;
    let e1 = |lambda: T| -> Result<T> { Ok(mode_energy(p, lambda, lam1, 1500)?.energy) };

    let mut lo = T::of(1e-2);
    let mut flo = e1(lo)?;
    for _ in 0..8 {
        if flo > T::zero() {
            break;
        }
        lo *= T::of(0.1);
        flo = e1(lo)?;
    }
    if flo <= T::zero() {
        return Err(CknError::solver("mode-1 energy never positive at small lambda"));
    }
    let mut hi = lo;
    let mut fhi = flo;
    for _ in 0..60 {
        hi *= T::two();
        fhi = e1(hi)?;
        if fhi < T::zero() {
            break;
        }
    }
    if fhi >= T::zero() {
        return Err(CknError::solver("failed to bracket the instability threshold"));
    }

    // Safeguarded secant (falls back to bisection when the step leaves the
    // bracket); e_1 is affine in Λ so this converges almost immediately.
    for _ in 0..80 {
        let mut mid = hi - fhi * (hi - lo) / (fhi - flo);
        if !(mid > lo && mid < hi) {
            mid = T::half() * (lo + hi);
        }
        let fmid = e1(mid)?;
        if fmid > T::zero() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
            fhi = fmid;
        }
        if (hi - lo).abs() <= T::of(1e-8) * hi.abs() {
            break;
        }
    }
    Ok(T::half() * (lo + hi))
}

/// Outcome of the finite-difference second-variation check.
#[derive(Debug, Clone)]
pub struct SecondVariationReport<T> {
    /// ε-extrapolated quadratic coefficient of `G[φ_Λ + ε φ_Λ^{p/2} φ_1]`.
    pub coefficient: T,
    /// `‖φ_Λ‖_p^p (λ_1 - (p²-4)Λ/4)` with the cylinder p-norm.
    pub predicted: T,
    /// Raw `(ε, second difference / ε²)` pairs for each requested ε.
    pub per_eps: Vec<(T, T)>,
}

/// Angular quadrature and first-eigenfunction data for the explicit factors.
struct AngularProbe<T> {
    nodes_phi1: Vec<T>,
    nodes_grad2: Vec<T>,
    weights: Vec<T>,
    lambda1: T,
}

fn angular_probe<T: Real>(manifold: &ManifoldData<T>) -> Result<AngularProbe<T>> {
    let n = 128usize;
    if manifold.dim == 1 {
        // Circle of length L: φ_1 = √2 cos(2πω/L), normalized to ∫φ_1² = L.
        let len = manifold.vol;
        let h = len / T::of_usize(n);
        let k1 = T::two() * T::PI() / len;
        let mut nodes_phi1 = Vec::with_capacity(n);
        let mut nodes_grad2 = Vec::with_capacity(n);
        for j in 0..n {
            let om = (T::of_usize(j) + T::half()) * h;
            let c = (k1 * om).cos();
            let s = (k1 * om).sin();
            nodes_phi1.push(T::two().sqrt() * c);
            nodes_grad2.push(T::two() * k1 * k1 * s * s);
        }
        return Ok(AngularProbe {
            nodes_phi1,
            nodes_grad2,
            weights: vec![h; n],
            lambda1: k1 * k1,
        });
    }
    if manifold.is_sphere {
        // S^m: φ_1 = √(m+1) cos θ, |∇φ_1|² = (m+1) sin²θ, λ_1 = m.
        let m = T::of_usize(manifold.dim as usize);
        let h = T::PI() / T::of_usize(n);
        let mut nodes_phi1 = Vec::with_capacity(n);
        let mut nodes_grad2 = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut total = T::zero();
        for j in 0..n {
            let th = (T::of_usize(j) + T::half()) * h;
            let w = th.sin().powf(m - T::one()) * h;
            weights.push(w);
            total += w;
            let c = th.cos();
            let s = th.sin();
            nodes_phi1.push((m + T::one()).sqrt() * c);
            nodes_grad2.push((m + T::one()) * s * s);
        }
        // Normalize the weights to the sphere volume exactly.
        let fix = manifold.vol / total;
        for w in weights.iter_mut() {
            *w *= fix;
        }
        return Ok(AngularProbe {
            nodes_phi1,
            nodes_grad2,
            weights,
            lambda1: m,
        });
    }
    Err(CknError::domain(
        "second variation needs an explicit first eigenfunction (circle or sphere)",
    ))
}

/// Finite-difference check of the expansion
/// `G[φ_Λ + ε φ_Λ^{p/2} φ_1] - G[φ_Λ] = ε² ‖φ_Λ‖_p^p (λ_1 - ¼(p²-4)Λ) + o(ε²)`
/// for `G[ψ] = ∫ |∂_s ψ|² + |∇_ω ψ|² + Λψ² - (2/p)|ψ|^p` on the cylinder,
/// with `φ_1` the first angular eigenfunction normalized to `∫ φ_1² = vol`.
///
/// Each ε gives a centered second difference; the two smallest ε values are
/// Richardson-combined to remove the O(ε²) truncation of the difference.
pub fn second_variation_check<T: Real>(
    lambda: T,
    p: T,
    manifold: &ManifoldData<T>,
    eps_list: &[T],
) -> Result<SecondVariationReport<T>> {
    if eps_list.is_empty() {
        return Err(CknError::domain("eps_list must not be empty"));
    }
    for &e in eps_list {
        if !(e > T::zero() && e <= T::of(0.1)) {
            return Err(CknError::domain(format!("eps {e} outside (0, 0.1]")));
        }
    }
    let probe = angular_probe(manifold)?;
    let alpha = T::half() * (p - T::two()) * lambda.sqrt();
    let s_half = default_half_width(alpha);
    let n_s = 4001usize;
    let h = T::two() * s_half / T::of_usize(n_s - 1);
    let s: Vec<T> = (0..n_s).map(|i| -s_half + T::of_usize(i) * h).collect();

    // Analytic radial samples: φ, φ', f = φ^{p/2}, f'.
    let beta = T::two() / (p - T::two());
    let mut phi = Vec::with_capacity(n_s);
    let mut dphi = Vec::with_capacity(n_s);
    let mut f = Vec::with_capacity(n_s);
    let mut df = Vec::with_capacity(n_s);
    for &si in &s {
        let ph = phi_lambda(p, lambda, si)?;
        let dp = -beta * alpha * (alpha * si).tanh() * ph;
        phi.push(ph);
        dphi.push(dp);
        // f = φ^{p/2}, f' = (p/2) φ^{p/2 - 1} φ'.
        let fp = ph.powf(T::half() * p);
        f.push(fp);
        df.push(T::half() * p * fp / ph * dp);
    }

    let g_of = |eps: T| -> T {
        let mut integrand = Vec::with_capacity(n_s);
        for i in 0..n_s {
            let mut acc = T::zero();
            for j in 0..probe.weights.len() {
                let psi = phi[i] + eps * f[i] * probe.nodes_phi1[j];
                let dpsi = dphi[i] + eps * df[i] * probe.nodes_phi1[j];
                let ang = eps * eps * f[i] * f[i] * probe.nodes_grad2[j];
                let dens = dpsi * dpsi + ang + lambda * psi * psi
                    - T::two() / p * psi.abs().powf(p);
                acc += probe.weights[j] * dens;
            }
            integrand.push(acc);
        }
        trapezoid(&integrand, h)
    };

    let g0 = g_of(T::zero());
    let mut per_eps: Vec<(T, T)> = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let c = (g_of(eps) - T::two() * g0 + g_of(-eps)) / (T::two() * eps * eps);
        per_eps.push((eps, c));
    }

    // Extrapolate in ε using the two smallest values (error is O(ε²)).
    let mut sorted = per_eps.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let coefficient = if sorted.len() >= 2 {
        let (e1, c1) = sorted[0];
        let (e2, c2) = sorted[1];
        c1 + (c1 - c2) * e1 * e1 / (e2 * e2 - e1 * e1)
    } else {
        sorted[0].1
    };

    let phi_p: Vec<T> = phi.iter().map(|&x| x.powf(p)).collect();
    let norm_p = manifold.vol * trapezoid(&phi_p, h);
    let predicted = norm_p * (probe.lambda1 - (p * p - T::of(4.0)) * lambda / T::of(4.0));
    Ok(SecondVariationReport {
        coefficient,
        predicted,
        per_eps,
    })
}

/// Discrete residual `‖H_0 ∂_s φ_Λ‖ / ‖∂_s φ_Λ‖` of the translation zero
/// mode, using the analytic derivative samples.
pub fn translation_mode_residual<T: Real>(p: T, lambda: T, n: usize) -> Result<T> {
    let alpha = T::half() * (p - T::two()) * lambda.sqrt();
    let s = line_nodes(default_half_width(alpha), n);
    let h = s[1] - s[0];
    let v = linearization_potential(p, lambda, &s);
    let psi: Vec<T> = s
        .iter()
        .map(|&si| crate::closed_forms::phi_lambda_ds(p, lambda, si))
        .collect::<Result<_>>()?;
    let inv_h2 = T::one() / (h * h);
    let n_pts = s.len();
    let mut res2 = T::zero();
    let mut nrm2 = T::zero();
    for i in 0..n_pts {
        let left = if i == 0 { T::zero() } else { psi[i - 1] };
        let right = if i + 1 == n_pts { T::zero() } else { psi[i + 1] };
        let hpsi = (T::two() * psi[i] - left - right) * inv_h2 + (lambda - v[i]) * psi[i];
        res2 += hpsi * hpsi;
        nrm2 += psi[i] * psi[i];
    }
    Ok((res2 / nrm2).sqrt())
}

/// Convenience: the report for the wedge parameters of `params` on `manifold`.
pub fn report_for<T: Real>(
    params: &CknParams<T>,
    manifold: &ManifoldData<T>,
    k_max: usize,
) -> Result<SpectralReport<T>> {
    mode_spectrum(params.lambda, params.p, manifold, k_max)
}
