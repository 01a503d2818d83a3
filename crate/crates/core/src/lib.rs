//! # microtwin
//!
//! Atomistic energies of one-dimensional crystal deformations under two-body
//! potentials, and the continuum Taylor coefficients that describe them as the
//! lattice spacing goes to zero: elastic, sharp-interface, smooth-interface and
//! interface-repulsion terms.
//!
//! The crate is organised bottom-up:
//!
//! * [`potential`]: pair potentials with closed-form derivatives and decay envelopes.
//! * [`series`]: lattice sums with certified tails, zeta values, the `T_k` operators.
//! * [`discretization`]: lattice windows and the expansion parameters of an ε-sequence.
//! * [`deformation`]: piecewise polynomial deformations and microtwin configurations.
//! * [`energy`]: the brute-force atomistic energy, used as ground truth.
//! * [`expansion`]: the continuum coefficients (smooth, one jump, microtwin).
//! * [`profile`]: the optimal-profile problem between two close interfaces.

pub mod deformation;
pub mod discretization;
pub mod energy;
mod error;
pub mod expansion;
pub mod potential;
pub mod profile;
pub mod quadrature;
pub mod series;
mod summation;

pub use crate::error::{Error, Result};
pub use crate::potential::{DecayEnvelope, LennardJones, Potential};
pub use crate::series::SumResult;

/// Default absolute tolerance for certified series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;

/// The minimiser of the elastic energy `t ↦ Σ_j W(jt)` for Lennard-Jones with
/// σ = 1, `(1382/675675)^{1/6} π`.
pub fn lj_elastic_minimizer() -> f64 {
    (1382.0_f64 / 675675.0).powf(1.0 / 6.0) * std::f64::consts::PI
}
