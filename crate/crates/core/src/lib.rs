//! Extended Lie group variational integrators for Bregman Lagrangian dynamics.
//!
//! The Bregman Lagrangian `L = phi(t)/2 <J xi, xi> - theta(t) f(g)` generates accelerated
//! optimization flows on a Lie group. This crate discretizes it variationally on SO(3),
//! R^n and SO(3) x R^n, with an adaptive step size obtained from the discrete energy
//! equation, and provides the baselines and experiment harness used to study it.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bregman;
pub mod error;
pub mod harness;
pub mod integrators;
pub mod lie;
pub mod objectives;

pub use bregman::{BregmanParams, ContinuousState};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, TrajectoryRecord};
pub use integrators::{EnergySolve, ExtendedState, SolverOptions, StepRecord};
pub use lie::{AlgebraVector, GroupKind, GroupPoint, MetricOperator};
pub use objectives::Objective;
