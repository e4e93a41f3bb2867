//! Time schedule of the Bregman Lagrangian and its continuous Euler-Lagrange flow.
//!
//! With rate exponent `p`, gradient weight `C` and curvature factor `lambda`,
//!
//! ```text
//! L(t, g, xi) = phi(t)/2 <J xi, xi> - theta(t) f(g)
//! phi(t)   = t^(lambda p + 1) / p
//! theta(t) = C p t^((lambda + 1) p - 1)
//! ```

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::lie::{coad_star, AlgebraVector, GroupKind, GroupPoint, MetricOperator};
use crate::objectives::Objective;

/// Parameters `(p, C, lambda, J)` of the Bregman Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct BregmanParams {
    pub p: f64,
    pub c: f64,
    pub lambda: f64,
    pub metric: MetricOperator,
}

impl BregmanParams {
    pub fn new(p: f64, c: f64, lambda: f64, metric: MetricOperator) -> Result<Self> {
        if !(p > 0.0) || !(c > 0.0) || !(lambda >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "Bregman parameters need p > 0, C > 0, lambda >= 1 (got p = {p}, C = {c}, lambda = {lambda})"
            )));
        }
        Ok(BregmanParams {
            p,
            c,
            lambda,
            metric,
        })
    }

    /// `lambda = 1` and `J = I`.
    pub fn standard(p: f64, c: f64, kind: GroupKind) -> Result<Self> {
        Self::new(p, c, 1.0, MetricOperator::identity(kind))
    }

    pub fn kind(&self) -> GroupKind {
        self.metric.kind()
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("schedule evaluated at t = {t} <= 0")));
        }
        Ok(())
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(t.powf(self.lambda * self.p + 1.0) / self.p)
    }

    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        let e = self.lambda * self.p + 1.0;
        Ok(e / self.p * t.powf(e - 1.0))
    }

    pub fn theta(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.c * self.p * t.powf((self.lambda + 1.0) * self.p - 1.0))
    }

    pub fn theta_prime(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        let e = (self.lambda + 1.0) * self.p - 1.0;
        Ok(self.c * self.p * e * t.powf(e - 1.0))
    }

    /// Damping coefficient `(lambda p + 1) / t`.
    pub fn damping(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok((self.lambda * self.p + 1.0) / t)
    }

    /// Gradient forcing weight `C p^2 t^(p - 2)`.
    pub fn forcing(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.c * self.p * self.p * t.powf(self.p - 2.0))
    }
}

/// Point `(t, g, xi)` of the continuous flow, `xi` the left-trivialized velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousState {
    pub t: f64,
    pub g: GroupPoint,
    pub xi: AlgebraVector,
}

/// Right-hand side of the Euler-Lagrange equations: returns `(g^-1 g_dot, xi_dot)`.
///
/// `J xi_dot = -(lambda p + 1)/t J xi + ad*_xi (J xi) - C p^2 t^(p-2) grad_L f(g)`.
pub fn el_vector_field(
    state: &ContinuousState,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<(AlgebraVector, AlgebraVector)> {
    let damping = params.damping(state.t)?;
    let forcing = params.forcing(state.t)?;
    let grad = objective.gradient(&state.g)?;
    let j_xi = params.metric.apply(&state.xi);
    let gyro = coad_star(params.kind(), &state.xi, &j_xi)?;
    let rhs = (&gyro - &j_xi.scale(damping)) - grad.scale(forcing);
    Ok((state.xi.clone(), params.metric.apply_inverse(&rhs)))
}

/// Angular acceleration of the SO(3) equations written out with cross products:
/// `J Omega_dot = -(lambda p + 1)/t J Omega - Omega x J Omega - C p^2 t^(p-2) grad`.
pub fn so3_angular_acceleration(
    t: f64,
    omega: &Vector3<f64>,
    grad: &Vector3<f64>,
    params: &BregmanParams,
) -> Result<Vector3<f64>> {
    let j = params.metric.rotation_block();
    let j_omega = j * omega;
    let rhs = -j_omega * params.damping(t)? - omega.cross(&j_omega) - grad * params.forcing(t)?;
    let lu = j.lu();
    lu.solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("singular rotational metric".into()))
}

/// `L(t, g, xi) = t^(lambda p + 1)/(2p) <J xi, xi> - C p t^((lambda+1)p - 1) f(g)`.
pub fn bregman_lagrangian_value(
    state: &ContinuousState,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<f64> {
    let kinetic = 0.5 * params.phi(state.t)? * params.metric.pair(&state.xi, &state.xi);
    Ok(kinetic - params.theta(state.t)? * objective.value(&state.g)?)
}

/// Energy `phi/2 <J xi, xi> + theta f` associated with the Lagrangian.
pub fn bregman_energy(
    state: &ContinuousState,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<f64> {
    let kinetic = 0.5 * params.phi(state.t)? * params.metric.pair(&state.xi, &state.xi);
    Ok(kinetic + params.theta(state.t)? * objective.value(&state.g)?)
}
