//! Simulation and analysis of single-node time-delay reservoir computers.
//!
//! The crate is organised around the pipeline of a delay reservoir:
//!
//! * [`dde`] integrates retarded delay differential equations by the method
//!   of steps (classical RK4 on a delay-aligned grid).
//! * [`signal`] turns a discrete input sequence into the masked,
//!   piecewise-constant drive and samples virtual nodes from a trajectory.
//! * [`readout`] holds the NARMA10 target generator, ridge regression and
//!   NRMSE scoring.
//! * [`spectral`], [`separation`] and [`stability`] implement the analysis
//!   tools for linear scalar reservoirs: characteristic roots through the
//!   Lambert W function, Fourier-domain separation bounds, and
//!   Lyapunov–Krasovskii dissipation checks.
//! * [`bench`] wires everything into reproducible experiments.

// `!(x > 0.0)` deliberately rejects NaN alongside nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod dde;
pub mod error;
pub mod readout;
pub mod separation;
pub mod signal;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
