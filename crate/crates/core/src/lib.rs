//! Seeded simulation of the interaction-free "bomb test" and its reading as a
//! Leggett-Garg test on a two-level system.
//!
//! * [`qubit`]: density-matrix channels (rotations, dephasing, spin flips,
//!   projective and negative measurements).
//! * [`protocols`]: Ramsey and Mach-Zehnder sequences built from those
//!   channels, including the dichotomic π/3 variant and the Zeno scheme.
//! * [`experiment`]: deterministic shot campaigns with preparation, readout
//!   and T₁ imperfections, plus the raw record table format.
//! * [`estimators`]: contrast, Leggett-Garg `K`, witness and significance
//!   with bootstrap and binomial Monte Carlo uncertainties.
//! * [`metrics`]: closed-form figures of merit of the bomb tester.
//! * [`cli`]: the `bombtest` command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod metrics;
pub mod protocols;
pub mod qubit;
pub mod stats;

pub use error::{Error, Result};
