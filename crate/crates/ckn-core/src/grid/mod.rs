//! Discretized cylinder geometry: the logarithmic radial coordinate
//! s = log r with a uniform grid, an angular cross-section (circle,
//! axisymmetric colatitude, or none for purely radial problems), and the
//! measure weights for either the weighted picture dμ = e^{ns} ds dv_g or
//! the flat cylinder measure ds dv_g.
//!
//! The discrete radial operators are exponentially fitted (see
//! [`stencil`]): exact on {1, r², r⁻²}, which makes the quadratic-pressure
//! identities of [`ops`] hold to roundoff instead of O(h²).

pub mod io;
pub mod ops;
pub(crate) mod stencil;

use crate::closed_forms::{CknParams, ManifoldData};
use crate::error::{CknError, Result};
use crate::scalar::Real;
use rand::Rng;
use stencil::{divergence_norm, SStencils};

/// Which cross-section discretization a grid carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularKind {
    /// No angular degrees of freedom: fields are functions of s only.
    SymmetricOnly,
    /// Periodic circle of given length (d = 2 cross-section).
    Circle,
    /// Colatitude θ ∈ (0, π) with weight (sin θ)^{d-2}; axisymmetric
    /// fields on the (d-1)-sphere.
    Colatitude,
}

/// Requested angular resolution for [`CylinderGrid`] construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngularRes {
    SymmetricOnly,
    Circle { n_omega: usize },
    Colatitude { n_omega: usize },
}

/// Cross-section grid: nodes, quadrature weights (summing to the manifold
/// volume), and the face data of the discrete Laplace–Beltrami operator.
///
/// The circle stencils are trigonometrically fitted (exact on the first
/// harmonics); the d = 3 colatitude stencil is fitted to cos θ, including
/// at the pole cells, where the (sin θ)^{d-2} face weight vanishes and
/// closes the operator without any boundary condition.
#[derive(Debug, Clone)]
pub struct AngularGrid<T = f64> {
    pub kind: AngularKind,
    pub n_omega: usize,
    pub nodes: Vec<T>,
    /// Quadrature weights; sum equals the cross-section volume.
    pub weights: Vec<T>,
    /// Face conductances of the divergence-form Laplacian.
    pub(crate) face_w: Vec<T>,
    /// Per-node divisor of the divergence form.
    pub(crate) node_div: Vec<T>,
    /// Scale κ with weights[j] = κ·(node density), so that
    /// Σ_j weights[j]·v_j·(Δf)_j = −energy_scale·Σ_faces face_w·Δv·Δf.
    pub(crate) energy_scale: T,
    /// Centered first-derivative denominator.
    pub(crate) d1_den: T,
    pub periodic: bool,
}

impl<T: Real> AngularGrid<T> {
    fn symmetric_only(vol: T) -> Self {
        Self {
            kind: AngularKind::SymmetricOnly,
            n_omega: 1,
            nodes: vec![T::zero()],
            weights: vec![vol],
            face_w: Vec::new(),
            node_div: vec![T::one()],
            energy_scale: T::zero(),
            d1_den: T::one(),
            periodic: false,
        }
    }

    fn circle(length: T, n_omega: usize) -> Result<Self> {
        if n_omega < 4 {
            return Err(CknError::domain(format!(
                "circle cross-section needs at least 4 nodes, got {n_omega}"
            )));
        }
        let n_t = T::of_usize(n_omega);
        let h = length / n_t;
        let k1 = T::two() * T::PI() / length; // first-harmonic frequency
        let nodes = (0..n_omega).map(|j| T::of_usize(j) * h).collect();
        let weights = vec![h; n_omega];
        // Fitted second difference: denominator 4 sin²(k1 h/2)/k1².
        let half = T::half();
        let s = (k1 * h * half).sin();
        let den2 = T::of(4.0) * s * s / (k1 * k1);
        let face_w = vec![T::one() / den2; n_omega];
        let node_div = vec![T::one(); n_omega];
        // Fitted first difference: (f_{j+1} - f_{j-1})·k1 / (2 sin(k1 h)).
        let d1_den = T::two() * (k1 * h).sin() / k1;
        Ok(Self {
            kind: AngularKind::Circle,
            n_omega,
            nodes,
            weights,
            face_w,
            node_div,
            energy_scale: h,
            d1_den,
            periodic: true,
        })
    }

    fn colatitude(d: u32, vol: T, n_omega: usize) -> Result<Self> {
        if d < 3 {
            return Err(CknError::domain(
                "colatitude cross-section needs ambient dimension d >= 3",
            ));
        }
        if n_omega < 4 {
            return Err(CknError::domain(format!(
                "colatitude cross-section needs at least 4 nodes, got {n_omega}"
            )));
        }
        let n_t = T::of_usize(n_omega);
        let h = T::PI() / n_t;
        let half = T::half();
        let pw = d as i32 - 2; // exponent of sin θ in the weight
        let nodes: Vec<T> = (0..n_omega)
            .map(|j| (T::of_usize(j) + half) * h)
            .collect();
        let dens: Vec<T> = nodes.iter().map(|&t| t.sin().powi(pw)).collect();
        let dens_sum: T = dens.iter().copied().sum();
        let kappa = vol / (dens_sum);
        let weights: Vec<T> = dens.iter().map(|&x| x * kappa).collect();
        // Interior faces at θ = (j+1)h, j = 0..n-2; pole faces carry zero
        // flux because sin^{d-2} vanishes there.
        let face_w: Vec<T> = (0..n_omega - 1)
            .map(|j| (T::of_usize(j + 1) * h).sin().powi(pw))
            .collect();
        // d = 3 admits a stencil exact on cos θ; higher d uses plain h².
        let k_h = if d == 3 {
            T::two() * (half * h).sin() * h.sin()
        } else {
            h * h
        };
        let node_div: Vec<T> = dens.iter().map(|&x| x * k_h).collect();
        Ok(Self {
            kind: AngularKind::Colatitude,
            n_omega,
            nodes,
            weights,
            face_w,
            node_div,
            energy_scale: kappa / k_h,
            d1_den: T::two() * h.sin(),
            periodic: false,
        })
    }

    /// Discrete Laplace–Beltrami operator applied to one angular row.
    pub fn apply_laplacian(&self, row: &[T], out: &mut [T]) {
        let n = self.n_omega;
        match self.kind {
            AngularKind::SymmetricOnly => out[0] = T::zero(),
            AngularKind::Circle => {
                for j in 0..n {
                    let jp = if j + 1 == n { 0 } else { j + 1 };
                    let jm = if j == 0 { n - 1 } else { j - 1 };
                    out[j] = self.face_w[j] * (row[jp] - row[j])
                        - self.face_w[jm] * (row[j] - row[jm]);
                }
            }
            AngularKind::Colatitude => {
                for j in 0..n {
                    let up = if j + 1 < n {
                        self.face_w[j] * (row[j + 1] - row[j])
                    } else {
                        T::zero()
                    };
                    let dn = if j > 0 {
                        self.face_w[j - 1] * (row[j] - row[j - 1])
                    } else {
                        T::zero()
                    };
                    out[j] = (up - dn) / self.node_div[j];
                }
            }
        }
    }

    /// Centered first derivative in the angular coordinate. Colatitude
    /// ends use even reflection (axisymmetric fields have vanishing
    /// derivative at the poles).
    #[inline]
    pub fn d1(&self, row: &[T], j: usize) -> T {
        let n = self.n_omega;
        match self.kind {
            AngularKind::SymmetricOnly => T::zero(),
            AngularKind::Circle => {
                let jp = if j + 1 == n { 0 } else { j + 1 };
                let jm = if j == 0 { n - 1 } else { j - 1 };
                (row[jp] - row[jm]) / self.d1_den
            }
            AngularKind::Colatitude => {
                let up = if j + 1 < n { row[j + 1] } else { row[n - 1] };
                let dn = if j > 0 { row[j - 1] } else { row[0] };
                (up - dn) / self.d1_den
            }
        }
    }

    /// Σ_faces face_w·(Δa)(Δb), the bilinear face pairing with
    /// Σ_j weights·v·Δf = −energy_scale·(this).
    pub(crate) fn face_pairing(&self, a: &[T], b: &[T]) -> T {
        let n = self.n_omega;
        let mut acc = T::zero();
        match self.kind {
            AngularKind::SymmetricOnly => {}
            AngularKind::Circle => {
                for j in 0..n {
                    let jp = if j + 1 == n { 0 } else { j + 1 };
                    acc += self.face_w[j] * (a[jp] - a[j]) * (b[jp] - b[j]);
                }
            }
            AngularKind::Colatitude => {
                for j in 0..n - 1 {
                    acc += self.face_w[j] * (a[j + 1] - a[j]) * (b[j + 1] - b[j]);
                }
            }
        }
        acc
    }
}

/// A scalar field sampled on a [`CylinderGrid`]: row-major over
/// (s index, angular index). Fields do not borrow their grid; operations
/// check shape compatibility instead.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T = f64> {
    pub n_s: usize,
    pub n_omega: usize,
    pub data: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(n_s: usize, n_omega: usize) -> Self {
        Self { n_s, n_omega, data: vec![T::zero(); n_s * n_omega] }
    }

    pub fn from_fn(grid: &CylinderGrid<T>, mut f: impl FnMut(T, T) -> T) -> Self {
        let mut data = Vec::with_capacity(grid.n_s * grid.angular.n_omega);
        for i in 0..grid.n_s {
            for j in 0..grid.angular.n_omega {
                data.push(f(grid.s[i], grid.angular.nodes[j]));
            }
        }
        Self { n_s: grid.n_s, n_omega: grid.angular.n_omega, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n_omega + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.n_omega + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_omega..(i + 1) * self.n_omega]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { n_s: self.n_s, n_omega: self.n_omega, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn min_value(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn same_shape(&self, other: &Field<T>) -> bool {
        self.n_s == other.n_s && self.n_omega == other.n_omega
    }

    pub(crate) fn matches(&self, grid: &CylinderGrid<T>) -> Result<()> {
        if self.n_s != grid.n_s || self.n_omega != grid.angular.n_omega {
            return Err(CknError::shape(format!(
                "field is {}x{}, grid is {}x{}",
                self.n_s,
                self.n_omega,
                grid.n_s,
                grid.angular.n_omega
            )));
        }
        Ok(())
    }
}

/// A strictly positive field (a pressure). Construction checks positivity
/// and finiteness once so downstream operators can take it for granted.
#[derive(Debug, Clone)]
pub struct PressureField<T = f64>(Field<T>);

impl<T: Real> PressureField<T> {
    pub fn new(field: Field<T>) -> Result<Self> {
        if !field.is_finite() {
            return Err(CknError::domain("pressure field has non-finite entries"));
        }
        let min = field.min_value();
        if !(min > T::zero()) {
            return Err(CknError::domain(format!(
                "pressure must be strictly positive; min value {min}"
            )));
        }
        Ok(Self(field))
    }

    pub fn field(&self) -> &Field<T> {
        &self.0
    }

    pub fn into_field(self) -> Field<T> {
        self.0
    }
}

impl<T> std::ops::Deref for PressureField<T> {
    type Target = Field<T>;
    fn deref(&self) -> &Field<T> {
        &self.0
    }
}

/// How the s-direction is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// dμ = e^{ns} ds dv_g (the weighted picture; flow and K live here).
    Weighted,
    /// ds dv_g (the flat cylinder; the variational quotient lives here).
    Cylinder,
}

/// Construction request for [`CylinderGrid::build`].
#[derive(Debug, Clone)]
pub struct GridConfig<T = f64> {
    pub params: CknParams<T>,
    pub manifold: ManifoldData<T>,
    pub s_min: T,
    pub s_max: T,
    pub n_s: usize,
    pub angular: AngularRes,
    pub measure: MeasureKind,
    /// Acceptable truncation level: e^{-α·min(|s_min|, s_max)} must be
    /// below this. Defaults to 1e-10 in the convenience constructors.
    pub truncation_tol: T,
}

/// Uniform grid in s = log r with an angular cross-section and cached
/// measure/operator weights.
#[derive(Debug, Clone)]
pub struct CylinderGrid<T = f64> {
    pub params: CknParams<T>,
    pub manifold: ManifoldData<T>,
    pub s_min: T,
    pub s_max: T,
    pub n_s: usize,
    pub h: T,
    pub s: Vec<T>,
    pub angular: AngularGrid<T>,
    pub measure: MeasureKind,
    /// s-direction measure density at nodes: e^{ns} or 1.
    pub(crate) rho: Vec<T>,
    /// e^{(n-2)s} at faces s_i + h/2, i = 0..n_s-2.
    pub(crate) sigma_face: Vec<T>,
    /// e^{(n-2)s} at nodes.
    pub(crate) sigma_node: Vec<T>,
    pub(crate) st: SStencils<T>,
    /// Divergence-form normalization (h² + O(h⁴), exact on r²).
    pub(crate) div_norm: T,
    pub truncation_tol: T,
}

impl<T: Real> CylinderGrid<T> {
    pub fn build(cfg: GridConfig<T>) -> Result<Self> {
        let GridConfig { params, manifold, s_min, s_max, n_s, angular, measure, truncation_tol } = cfg;
        if n_s < 64 {
            return Err(CknError::domain(format!("need at least 64 radial nodes, got {n_s}")));
        }
        if !(s_max > s_min) {
            return Err(CknError::domain(format!("empty s-range [{s_min}, {s_max}]")));
        }
        let reach = s_min.abs().min(s_max);
        if (-params.alpha * reach).exp() >= truncation_tol {
            return Err(CknError::domain(format!(
                "domain too short: exp(-alpha*{reach}) = {:e} >= truncation tolerance {truncation_tol:e}",
                (-params.alpha * reach).exp()
            )));
        }
        let span = s_min.abs().max(s_max.abs());
        if measure == MeasureKind::Weighted && params.n * span >= T::of(700.0) {
            return Err(CknError::domain(format!(
                "measure weight e^(n s) overflows: n*|s| = {} >= 700",
                params.n * span
            )));
        }

        let angular = match angular {
            AngularRes::SymmetricOnly => AngularGrid::symmetric_only(manifold.vol),
            AngularRes::Circle { n_omega } => {
                if manifold.dim != 1 {
                    return Err(CknError::domain(format!(
                        "circle cross-section needs a 1-dimensional manifold, got dim {}",
                        manifold.dim
                    )));
                }
                AngularGrid::circle(manifold.vol, n_omega)?
            }
            AngularRes::Colatitude { n_omega } => {
                if manifold.dim + 1 != params.d || manifold.dim < 2 {
                    return Err(CknError::domain(format!(
                        "colatitude cross-section needs a sphere of dimension d-1 = {}, got {}",
                        params.d - 1,
                        manifold.dim
                    )));
                }
                AngularGrid::colatitude(params.d, manifold.vol, n_omega)?
            }
        };

        let n_t = T::of_usize(n_s - 1);
        let h = (s_max - s_min) / n_t;
        let s: Vec<T> = (0..n_s).map(|i| s_min + T::of_usize(i) * h).collect();
        let n = params.n;
        let half = T::half();
        let (rho, sigma_face, sigma_node) = match measure {
            MeasureKind::Weighted => (
                s.iter().map(|&si| (n * si).exp()).collect::<Vec<T>>(),
                (0..n_s - 1)
                    .map(|i| ((n - T::two()) * (s[i] + half * h)).exp())
                    .collect::<Vec<T>>(),
                s.iter().map(|&si| ((n - T::two()) * si).exp()).collect::<Vec<T>>(),
            ),
            MeasureKind::Cylinder => (
                vec![T::one(); n_s],
                vec![T::one(); n_s - 1],
                vec![T::one(); n_s],
            ),
        };

        Ok(Self {
            params,
            manifold,
            s_min,
            s_max,
            n_s,
            h,
            s,
            angular,
            measure,
            rho,
            sigma_face,
            sigma_node,
            st: SStencils::new(h),
            div_norm: divergence_norm(h, n),
            truncation_tol,
        })
    }

    /// Weighted-measure grid (dμ = e^{ns} ds dv_g) on [s_min, s_max].
    pub fn weighted(
        params: CknParams<T>,
        manifold: ManifoldData<T>,
        s_min: T,
        s_max: T,
        n_s: usize,
        angular: AngularRes,
    ) -> Result<Self> {
        Self::build(GridConfig {
            params,
            manifold,
            s_min,
            s_max,
            n_s,
            angular,
            measure: MeasureKind::Weighted,
            truncation_tol: T::of(1e-10),
        })
    }

    /// Flat cylinder grid (measure ds dv_g) on the symmetric interval
    /// [-s_half, s_half].
    pub fn cylinder(
        params: CknParams<T>,
        manifold: ManifoldData<T>,
        s_half: T,
        n_s: usize,
        angular: AngularRes,
    ) -> Result<Self> {
        Self::build(GridConfig {
            params,
            manifold,
            s_min: -s_half,
            s_max: s_half,
            n_s,
            angular,
            measure: MeasureKind::Cylinder,
            truncation_tol: T::of(1e-10),
        })
    }

    /// Measure of the cell around node (i, j).
    #[inline]
    pub fn node_measure(&self, i: usize, j: usize) -> T {
        self.rho[i] * self.h * self.angular.weights[j]
    }

    /// ∫ f dμ with the grid's own measure (cell sums; exponentially small
    /// quadrature error for smooth decaying integrands).
    pub fn integrate(&self, f: &Field<T>) -> Result<T> {
        f.matches(self)?;
        let mut acc = T::zero();
        for i in 0..self.n_s {
            let wi = self.rho[i] * self.h;
            let row = f.row(i);
            for j in 0..self.angular.n_omega {
                acc += wi * self.angular.weights[j] * row[j];
            }
        }
        Ok(acc)
    }

    /// ⟨a, b⟩_μ.
    pub fn inner(&self, a: &Field<T>, b: &Field<T>) -> Result<T> {
        a.matches(self)?;
        b.matches(self)?;
        let mut acc = T::zero();
        for i in 0..self.n_s {
            let wi = self.rho[i] * self.h;
            let (ra, rb) = (a.row(i), b.row(i));
            for j in 0..self.angular.n_omega {
                acc += wi * self.angular.weights[j] * ra[j] * rb[j];
            }
        }
        Ok(acc)
    }

    /// ‖f‖_{L²(dμ)}.
    pub fn norm_l2(&self, f: &Field<T>) -> Result<T> {
        Ok(self.inner(f, f)?.sqrt())
    }
}

/// p = (n-1) u^{-1/n}, computed in log space.
pub fn pressure_of_density<T: Real>(grid: &CylinderGrid<T>, u: &Field<T>) -> Result<PressureField<T>> {
    u.matches(grid)?;
    let n = grid.params.n;
    if !(u.min_value() > T::zero()) {
        return Err(CknError::domain("density must be strictly positive"));
    }
    let ln_nm1 = (n - T::one()).ln();
    PressureField::new(u.map(|x| (ln_nm1 - x.ln() / n).exp()))
}

/// u = ((n-1)/p)^n, the inverse of [`pressure_of_density`].
pub fn density_of_pressure<T: Real>(grid: &CylinderGrid<T>, p: &PressureField<T>) -> Result<Field<T>> {
    p.field().matches(grid)?;
    let n = grid.params.n;
    let ln_nm1 = (n - T::one()).ln();
    Ok(p.field().map(|x| (n * (ln_nm1 - x.ln())).exp()))
}

/// u = |w|^p, the density associated with a variational test function.
pub fn density_of_w<T: Real>(grid: &CylinderGrid<T>, w: &Field<T>) -> Result<Field<T>> {
    w.matches(grid)?;
    let p = grid.params.p;
    Ok(w.map(|x| x.abs().powf(p)))
}

/// Smooth random field supported in the middle half of the s-range
/// (vanishing identically near both ends); used by the self-adjointness
/// and integration-by-parts tests.
pub fn random_compact_field<T: Real, R: Rng>(grid: &CylinderGrid<T>, rng: &mut R) -> Field<T> {
    let len = grid.s_max - grid.s_min;
    let mid = T::half() * (grid.s_min + grid.s_max);
    let quarter = T::of(0.25) * len;
    let mut coef = [[0.0f64; 4]; 3];
    for row in coef.iter_mut() {
        for c in row.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
    }
    let pi = T::PI();
    Field::from_fn(grid, |s, w| {
        let x = (s - mid) / quarter; // in [-2, 2]
        if x.abs() >= T::one() {
            return T::zero();
        }
        // C² window: cos³(pi x / 2); zero value and slope at |x| = 1.
        let win = (T::half() * pi * x).cos().powi(3);
        let mut val = T::zero();
        for (k, row) in coef.iter().enumerate() {
            let ks = T::of_usize(k + 1) * pi * x;
            for (m, &c) in row.iter().enumerate() {
                let mw = T::of_usize(m) * w;
                val += T::of(c) * ks.sin() * (mw + T::of_usize(k)).cos();
            }
        }
        win * val
    })
}

/// Analytic description of a random admissible test pressure: quadratic
/// base (a + b r²) times the exponential of a band-limited perturbation
/// (≤ 4 modes in each direction). A recipe can be sampled onto grids of
/// different resolutions, which is what the order-of-convergence tests
/// need.
#[derive(Debug, Clone)]
pub struct PressureRecipe {
    pub a: f64,
    pub b: f64,
    amplitude: f64,
    coef: [[f64; 4]; 4],
    phase: [[f64; 4]; 4],
}

impl PressureRecipe {
    /// Draw a recipe. The perturbation satisfies |g| ≤ amplitude, so the
    /// multiplicative factor's min/max ratio is ≥ e^{-2·amplitude}; the
    /// documented resolution floor (ratio ≥ 1e-3) caps amplitude at 3.45.
    pub fn random<R: Rng>(rng: &mut R, amplitude: f64) -> Result<Self> {
        if !(0.0..=3.45).contains(&amplitude) {
            return Err(CknError::domain(format!(
                "perturbation amplitude must lie in [0, 3.45], got {amplitude}"
            )));
        }
        let a = rng.gen_range(0.3..3.0);
        let b = rng.gen_range(0.1..2.0);
        let mut coef = [[0.0f64; 4]; 4];
        let mut phase = [[0.0f64; 4]; 4];
        let mut total = 0.0;
        for k in 0..4 {
            for m in 0..4 {
                coef[k][m] = rng.gen_range(-1.0..1.0);
                phase[k][m] = rng.gen_range(0.0..std::f64::consts::TAU);
                total += coef[k][m].abs();
            }
        }
        let scale = amplitude / total.max(1e-12);
        for row in coef.iter_mut() {
            for c in row.iter_mut() {
                *c *= scale;
            }
        }
        Ok(Self { a, b, amplitude, coef, phase })
    }

    /// A plain quadratic pressure a + b r² (no perturbation).
    pub fn quadratic(a: f64, b: f64) -> Self {
        Self { a, b, amplitude: 0.0, coef: [[0.0; 4]; 4], phase: [[0.0; 4]; 4] }
    }

    /// Evaluate the recipe at a point of the (s, angular) cylinder.
    pub fn eval<T: Real>(&self, s_min: T, s_len: T, s: T, w: T) -> T {
        let base = T::of(self.a) + T::of(self.b) * (T::two() * s).exp();
        if self.amplitude == 0.0 {
            return base;
        }
        let x = (s - s_min) / s_len;
        let pi = T::PI();
        let mut g = T::zero();
        for k in 0..4 {
            for m in 0..4 {
                let sk = (T::of_usize(k) * pi * x + T::of(self.phase[k][m])).cos();
                let wm = (T::of_usize(m) * w).cos();
                g += T::of(self.coef[k][m]) * sk * wm;
            }
        }
        base * g.exp()
    }

    pub fn sample<T: Real>(&self, grid: &CylinderGrid<T>) -> Result<PressureField<T>> {
        let (s_min, len) = (grid.s_min, grid.s_max - grid.s_min);
        PressureField::new(Field::from_fn(grid, |s, w| self.eval(s_min, len, s, w)))
    }
}

/// Convenience wrapper: draw a recipe and sample it on `grid`.
pub fn random_pressure<T: Real, R: Rng>(
    grid: &CylinderGrid<T>,
    rng: &mut R,
    amplitude: f64,
) -> Result<PressureField<T>> {
    PressureRecipe::random(rng, amplitude)?.sample(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle_params() -> (CknParams<f64>, ManifoldData<f64>) {
        (
            CknParams::from_cylinder(2, 4.0, 1.0 / 3.0).unwrap(),
            ManifoldData::circle(2.0 * std::f64::consts::PI).unwrap(),
        )
    }

    #[test]
    fn weighted_grid_has_exponential_weights() {
        let (params, manifold) = circle_params();
        let g = CylinderGrid::weighted(params, manifold, -90.0, 90.0, 128, AngularRes::Circle { n_omega: 8 })
            .unwrap();
        let i = 40;
        let expect = (g.params.n * g.s[i]).exp() * g.h * (2.0 * std::f64::consts::PI / 8.0);
        assert!(((g.node_measure(i, 3) - expect) / expect).abs() < 1e-14);
        // Angular weights sum to the circle length.
        let wsum: f64 = g.angular.weights.iter().sum();
        assert!((wsum - 2.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_configs() {
        let (params, manifold) = circle_params();
        // Too few radial nodes.
        assert!(CylinderGrid::weighted(params.clone(), manifold.clone(), -90.0, 90.0, 32, AngularRes::SymmetricOnly).is_err());
        // Domain too short for the decay rate (alpha ~ 0.577 here).
        assert!(CylinderGrid::weighted(params.clone(), manifold.clone(), -10.0, 10.0, 128, AngularRes::SymmetricOnly).is_err());
        // Weight overflow: n·s_max too large.
        assert!(CylinderGrid::weighted(params.clone(), manifold.clone(), -300.0, 300.0, 256, AngularRes::SymmetricOnly).is_err());
        // Circle angular resolution on a non-circle manifold.
        let sphere = ManifoldData::sphere(2).unwrap();
        let p3 = CknParams::from_cylinder(3, 4.0, 1.0).unwrap();
        assert!(CylinderGrid::weighted(p3, sphere, -60.0, 60.0, 128, AngularRes::Circle { n_omega: 16 }).is_err());
    }

    #[test]
    fn colatitude_weights_sum_to_sphere_volume() {
        let params = CknParams::from_cylinder(3, 4.0, 1.0).unwrap();
        let sphere = ManifoldData::sphere(2).unwrap();
        let g = CylinderGrid::weighted(params, sphere, -40.0, 40.0, 128, AngularRes::Colatitude { n_omega: 32 })
            .unwrap();
        let wsum: f64 = g.angular.weights.iter().sum();
        assert!(((wsum - 4.0 * std::f64::consts::PI) / wsum).abs() < 1e-14);
    }

    #[test]
    fn circle_laplacian_is_exact_on_first_harmonics() {
        let (params, manifold) = circle_params();
        let g = CylinderGrid::cylinder(params, manifold, 45.0, 64, AngularRes::Circle { n_omega: 12 }).unwrap();
        let ang = &g.angular;
        let row: Vec<f64> = ang.nodes.iter().map(|&w| 0.7 * w.cos() - 0.2 * w.sin()).collect();
        let mut out = vec![0.0; 12];
        ang.apply_laplacian(&row, &mut out);
        for j in 0..12 {
            assert!((out[j] + row[j]).abs() < 1e-13, "j = {j}");
            let d = ang.d1(&row, j);
            let expect = -0.7 * ang.nodes[j].sin() - 0.2 * ang.nodes[j].cos();
            assert!((d - expect).abs() < 1e-13, "d1 at j = {j}");
        }
    }

    #[test]
    fn colatitude_laplacian_exact_on_cos_theta_for_d3() {
        let params = CknParams::<f64>::from_cylinder(3, 4.0, 1.0).unwrap();
        let sphere = ManifoldData::sphere(2).unwrap();
        let g = CylinderGrid::weighted(params, sphere, -40.0, 40.0, 128, AngularRes::Colatitude { n_omega: 24 })
            .unwrap();
        let ang = &g.angular;
        let row: Vec<f64> = ang.nodes.iter().map(|&t| t.cos()).collect();
        let mut out = vec![0.0; 24];
        ang.apply_laplacian(&row, &mut out);
        for j in 0..24 {
            // Δ cos θ = -2 cos θ on S², including the pole cells.
            assert!((out[j] + 2.0 * row[j]).abs() < 1e-13, "j = {j}: {} vs {}", out[j], -2.0 * row[j]);
        }
    }

    #[test]
    fn pressure_density_roundtrip() {
        let (params, manifold) = circle_params();
        let g = CylinderGrid::weighted(params, manifold, -90.0, 90.0, 128, AngularRes::Circle { n_omega: 8 })
            .unwrap();
        let u0 = Field::from_fn(&g, |s, w| (0.3 + 0.1 * (0.05 * s).sin() + 0.04 * w.cos()).exp());
        let p = pressure_of_density(&g, &u0).unwrap();
        let back = density_of_pressure(&g, &p).unwrap();
        for (x, y) in u0.data.iter().zip(back.data.iter()) {
            assert!(((x - y) / x).abs() < 1e-13);
        }
        // u ≡ 1 → p ≡ n-1.
        let ones = Field::from_fn(&g, |_, _| 1.0);
        let p1 = pressure_of_density(&g, &ones).unwrap();
        assert!((p1.max_value() - (g.params.n - 1.0)).abs() < 1e-13);
        assert!((p1.min_value() - (g.params.n - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn generators_are_positive_and_resolved() {
        let (params, manifold) = circle_params();
        let g = CylinderGrid::weighted(params, manifold, -90.0, 90.0, 256, AngularRes::Circle { n_omega: 16 })
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let p = random_pressure(&g, &mut rng, 0.3).unwrap();
            assert!(p.min_value() > 0.0);
            assert!(p.is_finite());
        }
        assert!(random_pressure(&g, &mut rng, 5.0).is_err()); // ratio bound
        let c = random_compact_field(&g, &mut rng);
        // Vanishes on the outer quarters.
        for i in 0..g.n_s / 8 {
            for j in 0..16 {
                assert_eq!(c.at(i, j), 0.0);
                assert_eq!(c.at(g.n_s - 1 - i, j), 0.0);
            }
        }
        assert!(c.data.iter().any(|&x| x != 0.0));
    }
}
