//! Cross-cutting checks of the measure-weighted operators: the
//! summation-by-parts pairing on random compact data, and the two
//! cross-section spectral-gap inequalities (closed curve and sphere) that
//! control the sign of the dissipation functional row by row.

use ckn_core::closed_forms::{fs_constants, CknParams, ManifoldData};
use ckn_core::grid::ops::{apply_l, dirichlet_energy_weighted, k_m};
use ckn_core::grid::{random_compact_field, AngularRes, CylinderGrid, Field};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn circle_grid(p: f64, n_s: usize, n_omega: usize) -> CylinderGrid<f64> {
    let params = CknParams::from_cylinder(2, p, 1.0 / 3.0).unwrap();
    let manifold = ManifoldData::circle(2.0 * std::f64::consts::PI).unwrap();
    CylinderGrid::cylinder(params, manifold, 90.0, n_s, AngularRes::Circle { n_omega }).unwrap()
}

fn sphere_grid(p: f64, n_s: usize, n_omega: usize) -> CylinderGrid<f64> {
    let params = CknParams::from_cylinder(3, p, 1.0).unwrap();
    let manifold = ManifoldData::sphere(2).unwrap();
    CylinderGrid::cylinder(params, manifold, 30.0, n_s, AngularRes::Colatitude { n_omega }).unwrap()
}

/// One cross-section integral per row: ∫ f ρ^{1-n} dσ with the angular
/// quadrature weights of the grid.
fn row_weighted_integral(grid: &CylinderGrid<f64>, f: &Field<f64>, p: &Field<f64>, i: usize) -> f64 {
    let one_m_n = 1.0 - grid.params.n;
    let mut acc = 0.0;
    for j in 0..f.n_omega {
        acc += grid.angular.weights[j] * f.at(i, j) * p.at(i, j).powf(one_m_n);
    }
    acc
}

/// Row-by-row sides of the cross-section bound: returns, per row,
/// (∫ k_M ρ^{1-n}, ∫ |∇ρ|² ρ^{1-n}, ∫ |∇ρ|⁴ ρ^{-2} ρ^{1-n}).
fn row_inequality_sides(grid: &CylinderGrid<f64>, p: &Field<f64>) -> Vec<(f64, f64, f64)> {
    let km = k_m(grid, p).unwrap();
    let mut grad2 = Field::zeros(p.n_s, p.n_omega);
    let mut grad4 = Field::zeros(p.n_s, p.n_omega);
    for i in 0..p.n_s {
        let row = p.row(i);
        for j in 0..p.n_omega {
            let d = grid.angular.d1(row, j);
            *grad2.at_mut(i, j) = d * d;
            *grad4.at_mut(i, j) = d * d * d * d / (row[j] * row[j]);
        }
    }
    (0..p.n_s)
        .map(|i| {
            (
                row_weighted_integral(grid, &km, p, i),
                row_weighted_integral(grid, &grad2, p, i),
                row_weighted_integral(grid, &grad4, p, i),
            )
        })
        .collect()
}

/// 50 random positive cross-section profiles, one per radial row:
/// base·(1 + Σ_m a_m cos(m·θ + φ_m)) with Σ|a_m| ≤ 0.5.
fn random_rows(grid: &CylinderGrid<f64>, seed: u64, phases: bool) -> Field<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut field = Field::zeros(grid.n_s, grid.angular.n_omega);
    for i in 0..grid.n_s {
        let base = rng.gen_range(0.8..2.0);
        let mut amps = [0.0f64; 4];
        let mut phis = [0.0f64; 4];
        let mut total = 0.0;
        for m in 0..4 {
            amps[m] = rng.gen_range(-1.0..1.0);
            phis[m] = if phases {
                rng.gen_range(0.0..std::f64::consts::TAU)
            } else {
                0.0
            };
            total += amps[m].abs();
        }
        let target = rng.gen_range(0.1..0.5);
        for a in amps.iter_mut() {
            *a *= target / total;
        }
        for j in 0..grid.angular.n_omega {
            let th = grid.angular.nodes[j];
            let mut v = 1.0;
            for m in 0..4 {
                v += amps[m] * ((m as f64 + 1.0) * th + phis[m]).cos();
            }
            *field.at_mut(i, j) = base * v;
        }
    }
    assert!(field.min_value() > 0.3, "ensemble lost positivity");
    field
}

#[test]
fn summation_by_parts_pairs_l_with_the_face_energy_on_random_fields() {
    // ⟨w, Lw⟩_μ = −∫|Dw|² dμ to 1e-8 on 100 random compact fields per
    // grid configuration, plus the two-field symmetry of the pairing.
    let weighted_circle = CylinderGrid::weighted(
        CknParams::from_cylinder(2, 4.0, 1.0).unwrap(),
        ManifoldData::circle(2.0 * std::f64::consts::PI).unwrap(),
        -25.0,
        25.0,
        192,
        AngularRes::Circle { n_omega: 16 },
    )
    .unwrap();
    let weighted_sphere = CylinderGrid::weighted(
        CknParams::from_cylinder(3, 4.0, 1.0).unwrap(),
        ManifoldData::sphere(2).unwrap(),
        -25.0,
        25.0,
        160,
        AngularRes::Colatitude { n_omega: 20 },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for grid in [weighted_circle, weighted_sphere] {
        let mut previous: Option<(Field<f64>, Field<f64>)> = None;
        for _ in 0..100 {
            let w = random_compact_field(&grid, &mut rng);
            let lw = apply_l(&grid, &w).unwrap();
            let pair = grid.inner(&w, &lw).unwrap();
            let energy = dirichlet_energy_weighted(&grid, &w).unwrap();
            assert!(
                (pair + energy).abs() <= 1e-8 * (1.0 + energy.abs()),
                "pairing defect {:e} against energy {:e}",
                (pair + energy).abs(),
                energy
            );
            if let Some((v, lv)) = &previous {
                let a = grid.inner(v, &lw).unwrap();
                let b = grid.inner(&w, lv).unwrap();
                let scale = grid.norm_l2(v).unwrap() * grid.norm_l2(&w).unwrap();
                assert!(
                    (a - b).abs() <= 1e-8 * (1.0 + scale),
                    "asymmetry {:e} at scale {:e}",
                    (a - b).abs(),
                    scale
                );
            }
            previous = Some((w, lw));
        }
    }
}

#[test]
fn closed_curve_rows_satisfy_the_gap_bound_with_quartic_improvement() {
    // ∫k_M ρ^{1-n} ≥ ((n-2)/(n-1)·λ₁ − (n-2)α²)∫|∇ρ|²ρ^{1-n}
    //              + (n+3)(n-2)/12·∫|∇ρ|⁴ρ^{-2}ρ^{1-n}
    // on 50 random positive circle profiles, each side by quadrature.
    for (p_exp, seed) in [(4.0, 7u64), (3.0, 8u64)] {
        let grid = circle_grid(p_exp, 64, 256);
        let n = grid.params.n;
        let a2 = grid.params.alpha * grid.params.alpha;
        let lam1 = grid.manifold.lambda1;
        let grad_coef = (n - 2.0) / (n - 1.0) * lam1 - (n - 2.0) * a2;
        let quart_coef = (n + 3.0) * (n - 2.0) / 12.0;
        let field = random_rows(&grid, seed, true);
        for (i, (lhs, grad, quart)) in row_inequality_sides(&grid, &field).iter().enumerate() {
            let slack = lhs - grad_coef * grad - quart_coef * quart;
            assert!(
                slack >= -1e-8,
                "row {i} (n = {n}): slack {slack:e}, lhs {lhs:e}, grad {grad:e}, quart {quart:e}"
            );
        }
    }
}

#[test]
fn sphere_rows_satisfy_the_spectral_gap_bound() {
    // ∫k_M ρ^{1-n} ≥ (λ⋆ − (n-2)α²)∫|∇ρ|²ρ^{1-n} on 50 random positive
    // axisymmetric profiles of the 2-sphere.
    let grid = sphere_grid(4.0, 64, 256);
    let n = grid.params.n;
    let a2 = grid.params.alpha * grid.params.alpha;
    let consts = fs_constants(3, n, &grid.manifold).unwrap();
    let grad_coef = consts.lambda_star - (n - 2.0) * a2;
    let field = random_rows(&grid, 9, false);
    for (i, (lhs, grad, _)) in row_inequality_sides(&grid, &field).iter().enumerate() {
        let slack = lhs - grad_coef * grad;
        assert!(
            slack >= -1e-7,
            "row {i}: slack {slack:e}, lhs {lhs:e}, grad {grad:e}"
        );
    }
}
