//! Discrete Bregman Lagrangian and the pieces of its variational integrator that do not
//! depend on how the step size is chosen.
//!
//! ```text
//! L_d = phi(t_mid)/h T_d(f_k) - h/2 theta(t_k) f(g_k) - h/2 theta(t_{k+1}) f(g_k f_k)
//! ```
//!
//! with `t_mid = t_k + h/2`, `T_d(F) = tr[(I - F) J_d]` on SO(3) and
//! `T_d(dx) = 1/2 dx^T J dx` on R^n (a sum of both on the product group).

use nalgebra::{DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::bregman::BregmanParams;
use crate::error::{Error, Result};
use crate::integrators::dd::{self, Dd};
use crate::integrators::rotation::{solve_relative_rotation, RotationMethod};
use crate::integrators::SolverOptions;
use crate::lie::{coadjoint, log_so3, AlgebraVector, GroupPoint, MetricOperator, SMALL_ANGLE};
use crate::objectives::Objective;

/// Discrete kinetic term `T_d` of a relative update.
pub fn discrete_kinetic(relative: &GroupPoint, metric: &MetricOperator) -> f64 {
    let rot = relative
        .rotation()
        .map_or(0.0, |f| rotation_kinetic(f, metric));
    let lin = relative
        .translation()
        .map_or(0.0, |dx| 0.5 * dx.dot(&(metric.linear_block() * dx)));
    rot + lin
}

/// `tr[(I - F) J_d]`, evaluated as `(1 - cos|v|)/|v|^2 v^T J v` with `v = log F` so that
/// small rotations do not cancel.
fn rotation_kinetic(f: &Matrix3<f64>, metric: &MetricOperator) -> f64 {
    match log_so3(f) {
        Ok(v) => {
            let angle = v.norm();
            let half = 0.5 * angle;
            let coefficient = if angle < SMALL_ANGLE {
                0.5 - angle * angle / 24.0
            } else {
                2.0 * (half.sin() / angle).powi(2)
            };
            coefficient * v.dot(&(metric.rotation_block() * v))
        }
        // near a half turn there is nothing to cancel
        Err(_) => ((Matrix3::identity() - f) * metric.rotation_jd()).trace(),
    }
}

/// Schedule values needed by one step of length `h` starting at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub t: f64,
    pub h: f64,
    pub phi_mid: f64,
    pub phi_prime_mid: f64,
    pub theta: f64,
    pub theta_next: f64,
    pub theta_prime: f64,
    pub theta_prime_next: f64,
    pub(crate) theta_dd: Dd,
    pub(crate) theta_next_dd: Dd,
    pub(crate) theta_prime_dd: Dd,
    pub(crate) theta_prime_next_dd: Dd,
}

impl StepSchedule {
    pub fn new(params: &BregmanParams, t: f64, h: f64) -> Result<Self> {
        let next = t + h;
        if !(next > t) {
            return Err(Error::Domain(format!(
                "time must increase: t_k = {t}, t_k+1 = {next}"
            )));
        }
        let mid = t + 0.5 * h;
        let theta = params.theta(t)?;
        let theta_next = params.theta(next)?;
        let theta_prime = params.theta_prime(t)?;
        let theta_prime_next = params.theta_prime(next)?;
        Ok(StepSchedule {
            t,
            h,
            phi_mid: params.phi(mid)?,
            phi_prime_mid: params.phi_prime(mid)?,
            theta,
            theta_next,
            theta_dd: dd::theta(params, t, theta),
            theta_next_dd: dd::theta(params, next, theta_next),
            theta_prime_dd: dd::theta_prime(params, t, theta_prime),
            theta_prime_next_dd: dd::theta_prime(params, next, theta_prime_next),
            theta_prime,
            theta_prime_next,
        })
    }

    /// `E_k = D_{t_k} L_d`.
    pub fn energy_minus(&self, kinetic: f64, f_k: f64, f_next: f64) -> f64 {
        self.energy_minus_dd(kinetic, f_k, f_next).to_f64()
    }

    /// `E_{k+1} = -D_{t_{k+1}} L_d`.
    pub fn energy_plus(&self, kinetic: f64, f_k: f64, f_next: f64) -> f64 {
        self.energy_plus_dd(kinetic, f_k, f_next).to_f64()
    }

    /// The `theta f` and `h theta' f` terms dominate late; they are summed in double-double.
    fn potential_dd(&self, f_k: f64, f_next: f64) -> Dd {
        self.theta_dd
            .mul_f64(0.5 * f_k)
            .add(self.theta_next_dd.mul_f64(0.5 * f_next))
    }

    pub(crate) fn energy_minus_dd(&self, kinetic: f64, f_k: f64, f_next: f64) -> Dd {
        let h = self.h;
        let rest = self.phi_prime_mid / (2.0 * h) * kinetic + self.phi_mid / (h * h) * kinetic;
        let drift = self.theta_prime_dd.mul_f64(f_k).mul_f64(0.5 * h);
        self.potential_dd(f_k, f_next)
            .sub(drift)
            .add(Dd::from_f64(rest))
    }

    pub(crate) fn energy_plus_dd(&self, kinetic: f64, f_k: f64, f_next: f64) -> Dd {
        let h = self.h;
        let rest = -self.phi_prime_mid / (2.0 * h) * kinetic + self.phi_mid / (h * h) * kinetic;
        let drift = self.theta_prime_next_dd.mul_f64(f_next).mul_f64(0.5 * h);
        self.potential_dd(f_k, f_next)
            .add(drift)
            .add(Dd::from_f64(rest))
    }
}

/// `L_d(t_k, t_{k+1}, g_k, f_k)`.
pub fn discrete_lagrangian(
    t_k: f64,
    t_next: f64,
    g_k: &GroupPoint,
    relative: &GroupPoint,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<f64> {
    if !(t_next > t_k) {
        return Err(Error::Domain(format!(
            "discrete Lagrangian needs t_k+1 > t_k (got {t_k}, {t_next})"
        )));
    }
    let h = t_next - t_k;
    let kinetic = discrete_kinetic(relative, &params.metric);
    let f_k = objective.value(g_k)?;
    let f_next = objective.value(&g_k.compose(relative)?)?;
    Ok(params.phi(t_k + 0.5 * h)? / h * kinetic
        - 0.5 * h * params.theta(t_k)? * f_k
        - 0.5 * h * params.theta(t_next)? * f_next)
}

/// Rotation solver implied by the metric: explicit for `J = c I`, Newton otherwise.
pub fn rotation_method(params: &BregmanParams, options: &SolverOptions) -> RotationMethod {
    if params.metric.scalar_rotation().is_some() {
        RotationMethod::Explicit
    } else {
        RotationMethod::Newton {
            tolerance: options.newton_tolerance,
        }
    }
}

/// Relative update `f_k` solving the momentum equation
/// `mu_k = phi_mid/h Ad*_{f^-1}(T*L_f D_f T_d) + h theta_k/2 grad_k` for a given `h`.
///
/// `shifted` is `mu_k - h theta_k/2 grad_k`. Returns the update and Newton iterations used.
pub fn relative_update(
    shifted: &AlgebraVector,
    sched: &StepSchedule,
    params: &BregmanParams,
    method: RotationMethod,
) -> Result<(GroupPoint, usize)> {
    let kind = params.kind();
    let scale = sched.h / sched.phi_mid;
    let linear = shifted.linear_part(kind);
    let dx = if linear.is_empty() {
        None
    } else {
        let b = AlgebraVector::from_slice(linear);
        let inv = params
            .metric
            .linear_block()
            .clone()
            .cholesky()
            .ok_or_else(|| {
                Error::InvalidInput("linear metric block is not positive definite".into())
            })?;
        Some(inv.solve(&b.0) * scale)
    };
    match kind.has_rotation() {
        true => {
            let target = shifted.head3() * scale;
            let sol = solve_relative_rotation(&target, &params.metric.rotation_jd(), method)?;
            let point = match dx {
                Some(dx) => GroupPoint::Product(sol.rotation, dx),
                None => GroupPoint::So3(sol.rotation),
            };
            Ok((point, sol.iterations))
        }
        false => Ok((GroupPoint::Rn(dx.unwrap_or_else(|| DVector::zeros(0))), 0)),
    }
}

/// Momentum update `mu_{k+1} = Ad*_{f_k}(shifted) - h theta_next/2 grad_{k+1}`.
///
/// With [`MomentumRule::LaggedTheta`] the last term uses `theta_k` instead of `theta_{k+1}`.
pub fn momentum_update(
    shifted: &AlgebraVector,
    relative: &GroupPoint,
    grad_next: &AlgebraVector,
    sched: &StepSchedule,
    rule: MomentumRule,
) -> Result<AlgebraVector> {
    let weight = match rule {
        MomentumRule::Variational => sched.theta_next,
        MomentumRule::LaggedTheta => sched.theta,
    };
    Ok(coadjoint(relative, shifted)?.axpy(-0.5 * sched.h * weight, grad_next))
}

/// Which schedule weight multiplies `grad f_{k+1}` in the momentum update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumRule {
    /// `theta(t_{k+1})`, as obtained from the discrete Lagrangian.
    #[default]
    Variational,
    /// `theta(t_k)` on both gradients: simpler, but not symmetric, so first order only.
    LaggedTheta,
}

/// `mu_k - h theta_k/2 grad_k`.
pub fn shifted_momentum(
    mu: &AlgebraVector,
    grad: &AlgebraVector,
    sched: &StepSchedule,
) -> AlgebraVector {
    mu.axpy(-0.5 * sched.h * sched.theta, grad)
}
