//! Exact evaluation of intersection pairings on the moduli space of stable
//! holomorphic bundles of coprime rank and degree, via iterated residue
//! formulas.
//!
//! The crate is organised around a small exact-arithmetic stack:
//!
//! * [`series`] — iterated multivariate Laurent series over the rationals,
//!   with nilpotent formal parameters and truncation-cap bookkeeping;
//! * [`grassmann`] — the exterior algebra carrying the torus integrand and
//!   its Berezin integral;
//! * [`lie`] — root-system data for `SU(n)`: symmetric polynomials, their
//!   derivatives and Hessians, the degree twist vector, the Weyl group;
//! * [`symfunc`] — rewriting symmetric polynomials in the elementary
//!   symmetric basis, giving Pontryagin-ring representatives;
//! * [`pairing`] — assembly of the residue formula and exact pairings of
//!   generator monomials against the fundamental class;
//! * [`chern`] — pairings against the Chern polynomial, and the rank-two
//!   closed-form residue table.

pub mod chern;
pub mod error;
pub mod grassmann;
pub mod lie;
pub mod pairing;
pub mod rational;
pub mod series;
pub mod symfunc;
pub mod verify;

pub use error::{Error, Result};
pub use rational::Rational;
pub use series::{CapSpec, LaurentSeries, Var, VariableOrder, UNBOUNDED};
