//! Optimization algorithms derived from optimal control.
//!
//! Minimizing `E(x)` is lifted to a control problem with dynamics `ẋ = u`.
//! Along its extremals the costate is `λ_x = -ν₀ ∇E(x)` and the Hamiltonian
//! vanishes, so the control is left undetermined by the maximum condition.
//! It is chosen instead to maximize the dissipation of a control Lyapunov
//! function (CLF) of the costate over an ellipsoidal control set. Euler
//! discretization of the resulting flows recovers damped Newton, gradient
//! descent, and Gauss–Southwell, block, and normalized coordinate descent.
//!
//! The crate is `no_std` and needs only `alloc`.
//!
//! * [`objectives`]: oracles, benchmark catalog, finite-difference checks
//! * [`costate`]: integral of motion, Hamiltonian, adjoint integration
//! * [`clf`]: CLF families, active sets, unbiased subgradients
//! * [`controller`]: maximum-principle and Newton controls
//! * [`flow`]: continuous-time primitives
//! * [`algorithms`]: discrete iterations and a reference Gauss–Southwell

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod algorithms;
pub mod clf;
pub mod controller;
pub mod costate;
mod error;
pub mod flow;
pub mod linalg;
pub mod objectives;
pub mod trace;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
