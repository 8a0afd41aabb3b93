//! One-dimensional quadrature helpers.
//!
//! Adaptive Simpson is used where an integrand is only known pointwise
//! (Barenblatt mass normalization, norm checks in tests); grid functionals
//! elsewhere use the grid's own measure weights.

use crate::error::{CknError, Result};
use crate::scalar::Real;

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
///
/// The interval is first split into `min_panels` panels (so narrow features
/// cannot be missed by the first bisection) and each panel is refined
/// adaptively up to `max_depth`.
pub fn adaptive_simpson<T: Real>(
    f: impl Fn(T) -> T + Copy,
    a: T,
    b: T,
    tol: T,
    min_panels: usize,
    max_depth: usize,
) -> Result<T> {
    if !(b > a) {
        return Err(CknError::domain("quadrature interval is empty".to_string()));
    }
    let panels = min_panels.max(1);
    let width = (b - a) / T::of_usize(panels);
    let panel_tol = tol / T::of_usize(panels);
    let mut total = T::zero();
    for i in 0..panels {
        let x0 = a + T::of_usize(i) * width;
        let x1 = x0 + width;
        let fx0 = f(x0);
        let fx1 = f(x1);
        let xm = T::half() * (x0 + x1);
        let fxm = f(xm);
        let whole = simpson(x0, x1, fx0, fxm, fx1);
        total += adapt(f, x0, x1, fx0, fxm, fx1, whole, panel_tol, max_depth)?;
    }
    Ok(total)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::of(6.0) * (fa + T::of(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<T: Real>(
    f: impl Fn(T) -> T + Copy,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: usize,
) -> Result<T> {
    let m = T::half() * (a + b);
    let lm = T::half() * (a + m);
    let rm = T::half() * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    // Accept on the Richardson estimate, or once the requested tolerance has
    // fallen below what roundoff on this panel can resolve (the halved
    // tolerances otherwise become unreachable and the recursion bottoms out
    // on perfectly smooth integrands).
    let noise_floor = T::of(30.0) * T::epsilon() * (left.abs() + right.abs() + whole.abs());
    if err.abs() <= T::of(15.0) * tol || err.abs() <= noise_floor || !(a < lm && rm < b) {
        return Ok(left + right + err / T::of(15.0));
    }
    if depth == 0 {
        return Err(CknError::solver(format!(
            "adaptive quadrature did not reach tolerance on [{a}, {b}]"
        )));
    }
    let half_tol = T::half() * tol;
    Ok(adapt(f, a, m, fa, flm, fm, left, half_tol, depth - 1)?
        + adapt(f, m, b, fm, frm, fb, right, half_tol, depth - 1)?)
}

/// Composite trapezoid over uniformly sampled values with spacing `h`.
/// Spectrally accurate for smooth integrands that decay at both ends.
pub fn trapezoid<T: Real>(values: &[T], h: T) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let mut acc = T::half() * (values[0] + values[values.len() - 1]);
    for v in &values[1..values.len() - 1] {
        acc += *v;
    }
    acc * h
}
