//! Numerical toolkit for weighted interpolation inequalities of
//! Caffarelli–Kohn–Nirenberg type and their equivalent formulation on
//! cylinders.
//!
//! The crate provides, for the power-law-weighted setting:
//!
//! * closed forms for the admissible parameter wedge, the symmetry-breaking
//!   threshold curve, the explicit symmetric optimizers and their optimal
//!   constants ([`closed_forms`]);
//! * a log-radial × angular grid with measure-weighted operators, the
//!   carré-du-champ style pointwise quantity `k[p]` and its integral `K[p]`
//!   ([`grid`]);
//! * linearization spectra around the symmetric optimizer and a numerical
//!   threshold finder ([`stability`]);
//! * a mass-conserving semi-implicit fast-diffusion integrator with Fisher
//!   information diagnostics ([`flow`]);
//! * a direct variational minimizer on the cylinder and a bifurcation sweep
//!   ([`minimize`]);
//! * one-bound-state Keller–Lieb–Thirring style spectral estimates and the
//!   induced Hardy gap ([`spectral`]).
//!
//! All numerics are generic over the floating scalar through [`scalar::Real`];
//! `f64` is the default type parameter everywhere and the concrete aliases at
//! the crate root ([`Params`], [`Manifold`], [`Grid`], …) refer to it.

pub mod closed_forms;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod quad;
pub mod scalar;
pub mod special;
pub mod stability;
// Modules still under construction in this build stage:
pub mod flow;
pub mod minimize;
pub mod spectral;

pub use error::{CknError, Result};
pub use scalar::Real;

/// `f64` parameter bundle for the weighted inequality.
pub type Params = closed_forms::CknParams<f64>;
/// `f64` factor-manifold description.
pub type Manifold = closed_forms::ManifoldData<f64>;
/// `f64` symmetry-threshold constant bundle.
pub type FsConsts = closed_forms::FsConstants<f64>;
/// `f64` cylinder grid.
pub type Grid = grid::CylinderGrid<f64>;
/// `f64` scalar field on a [`Grid`].
pub type Field64 = grid::Field<f64>;
