//! Discrete-time set-valued admittance control for impact-contact force control.
//!
//! The controller couples two nonsmooth loops:
//!
//! * an outer loop that keeps the actuation torque inside a box `[-F, F]` by
//!   projection, feeding the clipped part back into the proxy (anti-windup);
//! * an inner super-twisting sliding-mode loop that drives the proxy
//!   tracking error to zero, discretized with implicit Euler so that the
//!   set-valued selection is obtained from a proximal map instead of a
//!   switching `sign`.
//!
//! Modules, bottom up:
//!
//! * [`setvalued`]: saturation, sign, box projection, norm-plus-quadratic prox.
//! * [`msta`]: explicit and implicit discretizations of the super-twisting loop.
//! * [`admittance`]: the full controller recursion and a naive clamped baseline.
//! * [`plant`]: simulated manipulators, linear motor, spring/Coulomb contact.
//! * [`sim`]: scenarios, fixed-step closed-loop runner, metrics, sweeps, presets.
//! * [`verify`]: self-check suites exposed through the CLI `verify` command.

// `!(x > 0.0)` rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admittance;
pub mod error;
pub mod msta;
pub mod plant;
pub mod plot;
pub mod setvalued;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

/// Joint-space vector (rad, rad/s, N·m depending on context).
pub type JointVector = nalgebra::DVector<f64>;
/// Square joint-space matrix.
pub type JointMatrix = nalgebra::DMatrix<f64>;
