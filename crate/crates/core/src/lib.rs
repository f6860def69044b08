//! Numerical construction of theta-functional solutions to the Ernst equation.
//!
//! The crate builds, for a spacetime point `ξ = ζ + iρ`, the hyperelliptic
//! curve `y² = (x−ξ)(x−ξ̄)·Π(x−E_j)(x−F_j)`, computes its normalized period
//! matrix and Abel maps to the two points at infinity under a fixed homology
//! convention, evaluates multi-dimensional theta functions with
//! characteristics, and assembles the Ernst potential together with the
//! identities it must satisfy (conjugation symmetry, Fay reduction of the
//! real part, the Ernst PDE itself, and the metric quadratures).
//!
//! Modules, bottom-up:
//!
//! * [`numeric`] — dense complex linear algebra at small sizes, real
//!   Cholesky, Gauss–Legendre and Gauss–Chebyshev rules.
//! * [`surface`] — the curve family, branch tracking, contour routing,
//!   period matrices and Abel vectors.
//! * [`theta`] — theta series with characteristics, quasi-periodicity,
//!   conjugation constancy, odd characteristics and the Fay cross-ratio.
//! * [`ernst`] — the potential, its reality identities, finite-difference
//!   PDE residuals and the metric quadratures for `A` and `k`.

pub mod ernst;
pub mod numeric;
pub mod surface;
pub mod theta;

pub use num_complex::Complex64;
