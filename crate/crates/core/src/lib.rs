//! Measurement-time statistics for small quantum systems.
//!
//! * [`hilbert`]: states, certified operators, propagators, Heisenberg evolution.
//! * [`detector`]: the correlation projector `M`, `P_M(t)` and its pathologies.
//! * [`repeated`]: repeated projective measurement, Zeno freezing, resolvability.
//! * [`spin`]: the two-spin detector model with closed-form references.
//! * [`arrival`]: free-particle arrival, probability current and backflow.
//!
//! Units: ħ = 1 throughout (and m = 1 in [`arrival`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrival;
pub mod detector;
pub mod error;
pub mod hilbert;
pub mod repeated;
pub mod spin;

pub use error::{Error, Result};
pub use hilbert::{DenseOperator, Flags, PiecewiseHamiltonian, StateVector, Tensor, C64};
