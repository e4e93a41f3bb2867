//! Discrete-time steppers for the Bregman Euler-Lagrange flow.
//!
//! * [`lgvi`]: adaptive extended Lie group variational integrator (time step from the
//!   discrete energy equation).
//! * [`elgvi`]: the same update at a prescribed fixed step, explicit for `J = c I`.
//! * [`splt`]: splitting of kinematics and momentum into exact sub-flows.
//! * [`runge_kutta`]: RK4 and Dormand-Prince RK4(5) on the embedded 12-dimensional
//!   coordinates of `SO(3) x R^3`.

mod dd;
pub mod discrete;
pub mod elgvi;
pub mod lgvi;
pub mod rotation;
pub mod runge_kutta;
pub mod splt;

pub use discrete::{discrete_kinetic, discrete_lagrangian, MomentumRule, StepSchedule};
pub use elgvi::{elgvi_step, elgvi_step_with, FixedStep};
pub use lgvi::{lgvi_init, lgvi_step, ExtendedState, Lgvi, StepOutput, StepRecord, Trial};
pub use rotation::{solve_relative_rotation, RotationMethod, RotationSolution};
pub use runge_kutta::{
    embed, rk45_integrate, rk4_step, so3_embedded_rhs, unembed, EmbeddedState, Rk45Options,
    Rk45Stepper, Rk45Trajectory,
};
pub use splt::{splt_momentum_flow, splt_step};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Controls for the adaptive step-size solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Accepted absolute energy residual `|E^-_k(h) - E_k|`.
    pub h_tolerance: f64,
    /// Cap on energy-residual evaluations per step.
    pub max_outer_iterations: usize,
    /// Residual tolerance of the Newton relative-rotation solve for general `J`.
    pub newton_tolerance: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub momentum_rule: MomentumRule,
    pub energy_solve: EnergySolve,
}

/// How far the step-size root-find is pushed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergySolve {
    /// Solve the energy equation to a bracket a few ulps wide. The step sequence then
    /// keeps the imprint of `h_0` for the whole run.
    Exact,
    /// Accept the first trial step whose residual is within `h_tolerance`, starting with
    /// the previous step itself. Step sequences from different `h_0` merge.
    #[default]
    WithinTolerance,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            h_tolerance: 1e-4,
            max_outer_iterations: 100,
            newton_tolerance: 1e-12,
            h_min: 1e-9,
            h_max: 10.0,
            momentum_rule: MomentumRule::Variational,
            energy_solve: EnergySolve::WithinTolerance,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_tolerance > 0.0) || !(self.newton_tolerance > 0.0) {
            return Err(Error::InvalidInput(
                "solver tolerances must be positive".into(),
            ));
        }
        if !(self.h_min > 0.0) || !(self.h_min < self.h_max) {
            return Err(Error::InvalidInput(format!(
                "need 0 < h_min < h_max (got {}, {})",
                self.h_min, self.h_max
            )));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidInput(
                "max_outer_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}
