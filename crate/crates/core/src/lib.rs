//! Finite element solver for the time-dependent Maxwell–Schrödinger system in
//! the Lorentz gauge, discretized by an alternating Crank–Nicolson Galerkin
//! scheme, plus a manufactured-solution harness for measuring convergence.
//!
//! The building blocks, bottom-up:
//!
//! * [`mesh`]: Kuhn-split structured meshes of the unit square and cube.
//! * [`element`]: P1/P2 Lagrange reference elements, simplex quadrature,
//!   affine maps.
//! * [`space`]: scalar `H^1_0` spaces and vector spaces with vanishing
//!   tangential trace, nodal interpolation and point evaluation.
//! * [`sparse`]: CSR matrices, CG and GMRES.
//! * [`forms`]: assembly of every bilinear form and load of the scheme.
//! * [`scheme`]: the time stepper.
//! * [`mms`]: exact solutions, their source terms, error norms.
//! * [`study`]: configuration, convergence studies and CSV output.

pub mod element;
pub mod forms;
pub mod mesh;
pub mod mms;
pub mod scheme;
pub mod space;
pub mod sparse;
pub mod study;

pub use num_complex::Complex64;
