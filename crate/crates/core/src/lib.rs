//! Numerical laboratory for the vanishing-viscosity limit of the 2D
//! compressible isentropic Navier-Stokes equations towards a planar
//! 2-rarefaction wave.
//!
//! The pipeline, bottom-up:
//!
//! * [`gas_model`]: γ-law gas, Riemann invariants and the exact fan;
//! * [`burgers_profile`]: smooth Burgers layer solved by characteristics;
//! * [`rarefaction_profile`]: the smooth approximate rarefaction wave;
//! * [`hyperbolic_wave`]: the linear corrector restoring the viscous forcing;
//! * [`ansatz`]: profile plus corrector, and Navier-Stokes initial data;
//! * [`ns_solver2d`]: explicit finite-volume/finite-difference NS solver;
//! * [`diagnostics`]: perturbation norms, fan error and energy functionals;
//! * [`harness`]: configuration, ε-sweeps, rate fitting and output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod burgers_profile;
pub mod diagnostics;
pub mod error;
pub mod gas_model;
pub mod harness;
pub mod hyperbolic_wave;
pub mod ns_solver2d;
pub mod rarefaction_profile;

pub use error::{Error, Result};
