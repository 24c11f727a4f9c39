//! Deformed sine-kernel Fredholm determinants.
//!
//! The crate evaluates `det(1 - K_w)` for the sine kernel deformed by a
//! weight `w`, in two equivalent Nyström representations, and provides the
//! numerical machinery used to check the integrable structure around it:
//!
//! * [`weights`]: admissible weights `w` and profiles `W` with exact derivatives,
//! * [`quadrature`]: composite Gauss–Legendre rules and principal values,
//! * [`operators`]: kernels and Nyström matrices,
//! * [`fredholm`]: log-determinants, resolvent solves, refinement,
//! * [`zs`]: resolvent fields, Riemann–Hilbert boundary values and the
//!   Zakharov–Shabat / Lax identities,
//! * [`pde_lab`]: `σ(y,s) = log Q_W(y,s)` surfaces and PDE residuals,
//! * [`scattering`]: the explicit map from initial data `f` to a profile `W`,
//! * [`classical_pv`]: the thinned sine-kernel determinant against σ-form Painlevé V.

pub mod classical_pv;
pub mod error;
pub mod fredholm;
pub mod ode;
pub mod operators;
pub mod pde_lab;
pub mod quadrature;
pub mod scattering;
pub mod weights;
pub mod zs;

pub use error::{Error, Result};
pub use num_complex::Complex64;
