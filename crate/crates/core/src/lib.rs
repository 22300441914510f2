//! Toolkit for bi-linear ("pseudo-2D") superconducting surface-code circuits.
//!
//! The crate covers four areas:
//!
//! * [`layout`] builds the surface-code qubit grid, folds it into a bi-linear
//!   array with airbridge-crossed resonators, and evaluates resource formulas.
//! * [`freq`] derives the resonator crossing graph and assigns frequencies
//!   under a minimum-detuning constraint.
//! * [`cz`] simulates a CZ gate between two transmons coupled through a damped
//!   resonator and sweeps average gate infidelity against the resonator
//!   quality factor.
//! * [`s21`] fits complex notch-resonator transmission traces for quality
//!   factors and computes the crosstalk spectrum of a crossed line.
//!
//! Data-parallel inner loops (quality-factor sweeps, process tomography,
//! Monte-Carlo fidelity sampling, per-component frequency allocation) run on
//! rayon when the default `parallel` feature is enabled and fall back to
//! sequential iteration otherwise. Results are identical either way.

pub mod cz;
pub mod freq;
pub mod layout;
pub mod s21;
pub mod svg;

mod linalg;
mod parallel;
