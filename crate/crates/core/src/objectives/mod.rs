//! Objective functions on the supported groups, each with a left-trivialized gradient.

mod camera;
mod wahba;

pub use camera::{
    perturb_pose, project, synth_scene, CameraScene, Feature, GradientMethod, Pose,
    ReprojectionObjective, DEFAULT_INTRINSICS, MIN_FEATURES,
};
pub(crate) use wahba::random_axis;
pub use wahba::{initial_rotation, random_wahba_matrix, WahbaProblem};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lie::{AlgebraVector, GroupKind, GroupPoint};

/// Default central-difference step along each algebra basis direction.
pub const FD_STEP: f64 = 1e-6;

/// A smooth cost on a Lie group.
///
/// `gradient` returns the left-trivialized gradient: for every algebra direction `eta`,
/// `d/ds f(g exp(s eta)) |_{s=0} = <gradient(g), eta>`.
pub trait Objective: Send + Sync {
    fn kind(&self) -> GroupKind;

    fn value(&self, g: &GroupPoint) -> Result<f64>;

    fn gradient(&self, g: &GroupPoint) -> Result<AlgebraVector>;

    /// Known minimum value, when available in closed form.
    fn optimum_value(&self) -> Option<f64> {
        None
    }
}

/// Central-difference left-trivialized gradient along the algebra basis.
pub fn finite_difference_gradient(
    objective: &dyn Objective,
    g: &GroupPoint,
    step: f64,
) -> Result<AlgebraVector> {
    let kind = g.kind();
    let dim = kind.algebra_dim();
    let mut grad = Vec::with_capacity(dim);
    let mut e = AlgebraVector::zeros(dim);
    for i in 0..dim {
        e.0[i] = step;
        let plus = objective.value(&g.retract(&e)?)?;
        e.0[i] = -step;
        let minus = objective.value(&g.retract(&e)?)?;
        e.0[i] = 0.0;
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(AlgebraVector::from_vec(grad))
}

/// `f(x) = 1/2 (x - c)^T H (x - c)` on R^n.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub hessian: DMatrix<f64>,
    pub center: DVector<f64>,
}

impl Quadratic {
    pub fn new(hessian: DMatrix<f64>, center: DVector<f64>) -> Self {
        Quadratic { hessian, center }
    }

    fn offset(&self, g: &GroupPoint) -> Result<DVector<f64>> {
        match g {
            GroupPoint::Rn(x) if x.len() == self.center.len() => Ok(x - &self.center),
            _ => Err(Error::InvalidInput(format!(
                "quadratic objective on R^{} evaluated at {:?}",
                self.center.len(),
                g.kind()
            ))),
        }
    }
}

impl Objective for Quadratic {
    fn kind(&self) -> GroupKind {
        GroupKind::Rn(self.center.len())
    }

    fn value(&self, g: &GroupPoint) -> Result<f64> {
        let d = self.offset(g)?;
        Ok(0.5 * d.dot(&(&self.hessian * &d)))
    }

    fn gradient(&self, g: &GroupPoint) -> Result<AlgebraVector> {
        let d = self.offset(g)?;
        let sym = (&self.hessian + self.hessian.transpose()) * 0.5;
        Ok(AlgebraVector(sym * d))
    }

    fn optimum_value(&self) -> Option<f64> {
        let sym = (&self.hessian + self.hessian.transpose()) * 0.5;
        sym.cholesky().map(|_| 0.0)
    }
}
