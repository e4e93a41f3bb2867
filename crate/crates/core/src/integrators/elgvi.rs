//! Fixed-step variant of the variational integrator: the momentum equation is solved at a
//! prescribed `h` and the energy equation is dropped.

use crate::bregman::BregmanParams;
use crate::error::{Error, Result};
use crate::integrators::discrete::{
    momentum_update, relative_update, rotation_method, shifted_momentum, MomentumRule, StepSchedule,
};
use crate::integrators::SolverOptions;
use crate::lie::{AlgebraVector, GroupPoint};
use crate::objectives::Objective;

/// Result of a fixed step, carrying the gradient at the new point for reuse.
#[derive(Debug, Clone)]
pub struct FixedStep {
    pub g: GroupPoint,
    pub mu: AlgebraVector,
    pub grad: AlgebraVector,
    pub newton_iterations: usize,
}

/// One step with the gradient at `g_k` supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub fn elgvi_step_with(
    t: f64,
    g: &GroupPoint,
    mu: &AlgebraVector,
    grad: &AlgebraVector,
    h: f64,
    params: &BregmanParams,
    objective: &dyn Objective,
    rule: MomentumRule,
) -> Result<FixedStep> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!(
            "fixed step must be positive (got {h})"
        )));
    }
    let schedule = StepSchedule::new(params, t, h)?;
    let shifted = shifted_momentum(mu, grad, &schedule);
    let method = rotation_method(params, &SolverOptions::default());
    let (relative, newton_iterations) = relative_update(&shifted, &schedule, params, method)?;
    let g_next = g.compose(&relative)?;
    let grad_next = objective.gradient(&g_next)?;
    let mu_next = momentum_update(&shifted, &relative, &grad_next, &schedule, rule)?;
    Ok(FixedStep {
        g: g_next,
        mu: mu_next,
        grad: grad_next,
        newton_iterations,
    })
}

/// `(g_k, mu_k) -> (g_{k+1}, mu_{k+1})` at fixed step `h`.
pub fn elgvi_step(
    t: f64,
    g: &GroupPoint,
    mu: &AlgebraVector,
    h: f64,
    params: &BregmanParams,
    objective: &dyn Objective,
    rule: MomentumRule,
) -> Result<(GroupPoint, AlgebraVector)> {
    let grad = objective.gradient(g)?;
    let step = elgvi_step_with(t, g, mu, &grad, h, params, objective, rule)?;
    Ok((step.g, step.mu))
}
