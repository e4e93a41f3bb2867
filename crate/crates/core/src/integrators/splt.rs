//! Splitting integrator `phi_{h/2} o psi_h o phi_{h/2}` on SO(3) with `J = I`.
//!
//! `phi_s` is the exact kinematic flow `R <- R exp(s Omega)` at frozen `Omega`. `psi_h` is the
//! exact flow of the momentum equation at frozen `R`, which for `J = I` is the linear ODE
//!
//! ```text
//! Omega_dot = -(m / t) Omega - C p^2 t^(p-2) G,    m = lambda p + 1,  G = grad_L f(R)
//! ```
//!
//! Multiplying by `t^m` and integrating from `t` to `t1 = t + h` gives, with `q = m + p - 1`
//! and `rho = t / t1`,
//!
//! ```text
//! Omega(t1) = rho^m Omega - (C p^2 / q) (t1^(p-1) - t^(p-1) rho^m) G
//! ```

use nalgebra::{Matrix3, Vector3};

use crate::bregman::BregmanParams;
use crate::error::{Error, Result};
use crate::lie::{exp_so3, GroupKind, GroupPoint};
use crate::objectives::Objective;

/// Exact solution of the frozen-gradient momentum equation from `t` to `t + h`.
pub fn splt_momentum_flow(
    t: f64,
    h: f64,
    omega: &Vector3<f64>,
    grad: &Vector3<f64>,
    params: &BregmanParams,
) -> Result<Vector3<f64>> {
    if !(t > 0.0) || !(h > 0.0) {
        return Err(Error::Domain(format!(
            "splitting flow needs t > 0, h > 0 (got {t}, {h})"
        )));
    }
    let p = params.p;
    let m = params.lambda * p + 1.0;
    let q = m + p - 1.0;
    let t1 = t + h;
    let decay = (t / t1).powf(m);
    let forcing = params.c * p * p / q * (t1.powf(p - 1.0) - t.powf(p - 1.0) * decay);
    Ok(omega * decay - grad * forcing)
}

/// One splitting step `(R_k, Omega_k) -> (R_{k+1}, Omega_{k+1})` starting at time `t`.
pub fn splt_step(
    t: f64,
    rotation: &Matrix3<f64>,
    omega: &Vector3<f64>,
    h: f64,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    if params.kind() != GroupKind::So3 || params.metric.scalar_rotation() != Some(1.0) {
        return Err(Error::Unsupported(
            "the splitting integrator is defined on SO(3) with J = I".into(),
        ));
    }
    let half = rotation * exp_so3(&(omega * (0.5 * h)));
    let grad = objective.gradient(&GroupPoint::So3(half))?.head3();
    let omega_next = splt_momentum_flow(t, h, omega, &grad, params)?;
    Ok((half * exp_so3(&(omega_next * (0.5 * h))), omega_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::runge_kutta::{rk45_integrate, Rk45Options};
    use crate::lie::{orthogonality_error, MetricOperator};
    use crate::objectives::{random_wahba_matrix, WahbaProblem};
    use nalgebra::SVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rest_without_gradient() {
        let params = BregmanParams::standard(6.0, 1.0, GroupKind::So3).unwrap();
        let w = WahbaProblem::new(Matrix3::identity());
        let (r, o) = splt_step(
            0.5,
            &Matrix3::identity(),
            &Vector3::zeros(),
            0.01,
            &params,
            &w,
        )
        .unwrap();
        assert_eq!(r, Matrix3::identity());
        assert_eq!(o, Vector3::zeros());
    }

    #[test]
    fn pure_damping() {
        let params = BregmanParams::standard(3.0, 1.0, GroupKind::So3).unwrap();
        let omega = Vector3::new(1.0, -2.0, 0.5);
        let out = splt_momentum_flow(1.5, 0.3, &omega, &Vector3::zeros(), &params).unwrap();
        let expected = omega * (1.5f64 / 1.8).powi(4);
        assert!((out - expected).norm() <= 1e-15);
    }

    #[test]
    fn closed_form_matches_reference_integration() {
        for &(p, lambda) in &[(2.0, 1.0), (6.0, 1.0), (3.5, 2.0)] {
            let params =
                BregmanParams::new(p, 0.7, lambda, MetricOperator::identity(GroupKind::So3))
                    .unwrap();
            let omega = Vector3::new(0.3, -0.2, 0.9);
            let grad = Vector3::new(-1.0, 0.4, 0.25);
            let (t0, h) = (0.4, 0.35);
            let exact = splt_momentum_flow(t0, h, &omega, &grad, &params).unwrap();
            let rhs = |t: f64, y: &SVector<f64, 3>| {
                Ok(-y * params.damping(t)? - grad * params.forcing(t)?)
            };
            let opts = Rk45Options {
                atol: 1e-14,
                rtol: 1e-14,
                ..Rk45Options::default()
            };
            let traj = rk45_integrate(rhs, t0, t0 + h, omega, &opts).unwrap();
            let reference = traj.states.last().unwrap();
            assert!((exact - reference).norm() <= 1e-10 * exact.norm().max(1.0));
        }
    }

    #[test]
    fn stays_on_the_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = WahbaProblem::new(random_wahba_matrix(&mut rng));
        let params = BregmanParams::standard(6.0, 1.0, GroupKind::So3).unwrap();
        let (mut r, mut o) = (exp_so3(&Vector3::new(2.5, 0.3, -0.4)), Vector3::zeros());
        let h = 0.001;
        for k in 0..10_000 {
            (r, o) = splt_step(0.1 + k as f64 * h, &r, &o, h, &params, &w).unwrap();
        }
        assert!(orthogonality_error(&r) <= 1e-12);
    }

    #[test]
    fn rejects_general_metric() {
        let j = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
        let params = BregmanParams::new(2.0, 1.0, 1.0, MetricOperator::so3(j).unwrap()).unwrap();
        let w = WahbaProblem::new(Matrix3::identity());
        assert!(matches!(
            splt_step(
                1.0,
                &Matrix3::identity(),
                &Vector3::zeros(),
                0.1,
                &params,
                &w
            ),
            Err(Error::Unsupported(_))
        ));
    }
}
