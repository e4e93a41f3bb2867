//! Solves `(F J_d - J_d F^T)^vee = b` for `F` in SO(3).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::lie::{exp_so3, hat, vee_unchecked};

/// Largest `|a|` accepted by the explicit solve (`asin` needs `|a| < 1`).
pub const EXPLICIT_NORM_LIMIT: f64 = 1.0 - 1e-12;
/// Newton iteration cap for the general-metric solve.
pub const NEWTON_MAX_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RotationMethod {
    /// Closed form, valid when `J = c I`.
    Explicit,
    /// Newton iteration on right perturbations `F <- F exp(delta)`, converged to `tolerance`
    /// relative to `max(1, |b|)`.
    Newton { tolerance: f64 },
}

/// Solution of the relative-rotation equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSolution {
    pub rotation: Matrix3<f64>,
    pub iterations: usize,
}

/// `(F J_d - J_d F^T)^vee`.
pub fn rotation_residual_map(f: &Matrix3<f64>, jd: &Matrix3<f64>) -> Vector3<f64> {
    vee_unchecked(&(f * jd - jd * f.transpose()))
}

/// Explicit solve for `J_d = d I`: `F = exp(asin|a|/|a| hat(a))` with `a = b / (2 d)`.
fn explicit(target: &Vector3<f64>, d: f64) -> Result<Matrix3<f64>> {
    let a = target / (2.0 * d);
    let norm = a.norm();
    if !(norm <= EXPLICIT_NORM_LIMIT) {
        return Err(Error::StepTooLarge { norm });
    }
    let scale = if norm < 1e-8 {
        // asin(x)/x = 1 + x^2/6 + ...
        1.0 + norm * norm / 6.0
    } else {
        norm.asin() / norm
    };
    Ok(exp_so3(&(a * scale)))
}

/// Solves `(F J_d - J_d F^T)^vee = target` for the rotation `F` closest to the identity.
///
/// `J_d = tr(J)/2 I - J`. The explicit method requires `J_d` to be a multiple of the
/// identity; Newton accepts any `J_d` derived from an SPD `J`, starting from the explicit
/// solution for the isotropic part of the metric.
pub fn solve_relative_rotation(
    target: &Vector3<f64>,
    jd: &Matrix3<f64>,
    method: RotationMethod,
) -> Result<RotationSolution> {
    match method {
        RotationMethod::Explicit => {
            let d = jd[(0, 0)];
            if *jd != Matrix3::identity() * d || !(d > 0.0) {
                return Err(Error::Unsupported(
                    "explicit relative-rotation solve needs J = c I".into(),
                ));
            }
            Ok(RotationSolution {
                rotation: explicit(target, d)?,
                iterations: 0,
            })
        }
        RotationMethod::Newton { tolerance } => newton(target, jd, tolerance),
    }
}

fn newton(target: &Vector3<f64>, jd: &Matrix3<f64>, tolerance: f64) -> Result<RotationSolution> {
    // isotropic part: J_d ~ (tr J_d / 3) I
    let d = jd.trace() / 3.0;
    let mut f = match explicit(target, d) {
        Ok(f) => f,
        Err(Error::StepTooLarge { .. }) => Matrix3::identity(),
        Err(e) => return Err(e),
    };
    let scale = target.norm().max(1.0);
    let mut residual = rotation_residual_map(&f, jd) - target;
    for iteration in 0..NEWTON_MAX_ITERATIONS {
        if residual.norm() <= tolerance * scale {
            return Ok(RotationSolution {
                rotation: f,
                iterations: iteration,
            });
        }
        // derivative along F exp(delta): ((tr G) I - G) F delta with G = F J_d
        let g = f * jd;
        let jac = (Matrix3::identity() * g.trace() - g) * f;
        let delta = jac
            .lu()
            .solve(&(-residual))
            .ok_or_else(|| Error::Convergence {
                iterations: iteration,
                residual: residual.norm(),
            })?;
        f *= exp_so3(&delta);
        residual = rotation_residual_map(&f, jd) - target;
    }
    if residual.norm() <= tolerance * scale {
        return Ok(RotationSolution {
            rotation: f,
            iterations: NEWTON_MAX_ITERATIONS,
        });
    }
    Err(Error::Convergence {
        iterations: NEWTON_MAX_ITERATIONS,
        residual: residual.norm(),
    })
}

/// The Newton Jacobian identity `(x^ A + A^T x^)^vee = (tr(A) I - A) x`, exposed for tests.
#[doc(hidden)]
pub fn skew_identity_lhs(x: &Vector3<f64>, a: &Matrix3<f64>) -> Vector3<f64> {
    vee_unchecked(&(hat(x) * a + a.transpose() * hat(x)))
}
