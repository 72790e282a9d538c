//! Weak pseudo-bosonic ladder families on a two-mode Hermite basis.
//!
//! The library works with tempered-distribution-like objects represented by
//! their pairings against an orthonormal Hermite basis `e_{n1} ⊗ e_{n2}`:
//!
//! * [`hermite`] — the 1-D oscillator eigenfunction basis, ladder index maps,
//!   and Gauss–Hermite quadrature used as the independent oracle.
//! * [`coeffs`] — dense coefficient grids over the basis with a trusted
//!   region plus a guard band, including the two delta-line vacua.
//! * [`operators`] — words in the bosonic generators, their weak action on
//!   coefficient grids, and the gain–loss ladder family constructors.
//! * [`summation`] — ordinary and Abel-regularized summation of shell series,
//!   with exact closed forms for alternating polynomial weights.
//! * [`pairing`] — the regularized sesquilinear basis product of two grids
//!   and the identity checks built on it (biorthonormality, weak eigenvalue
//!   transfer, adjoint-pairing identity, positivity).
//! * [`gainloss`] — the classical two-oscillator gain/loss system: parameter
//!   derivation, RK4 integration, conserved Hamiltonian, normal-mode map.
//! * [`exact`] — small exact algebra over `q·√r` coefficients used as an
//!   oracle for the floating-point ladder arithmetic.

pub mod coeffs;
pub mod dd;
pub mod error;
pub mod exact;
pub mod gainloss;
pub mod hermite;
pub mod operators;
pub mod pairing;
pub mod summation;

pub use error::{PbError, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num::complex::Complex64;
