use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lie::{exp_so3, vee_unchecked, AlgebraVector, GroupKind, GroupPoint};
use crate::objectives::Objective;

/// Wahba's attitude cost `f(R) = 1/2 |A - R|_F^2 = 1/2 (|A|_F^2 + 3) - tr(A^T R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WahbaProblem {
    a: Matrix3<f64>,
    optimum: Option<(Matrix3<f64>, f64)>,
}

impl WahbaProblem {
    pub fn new(a: Matrix3<f64>) -> Self {
        let mut problem = WahbaProblem { a, optimum: None };
        problem.optimum = problem.optimum().ok();
        problem
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.a
    }

    /// Cost at any 3x3 matrix. Off-group matrices are accepted so drifting
    /// embedded integrators can still be evaluated.
    pub fn eval_matrix(&self, r: &Matrix3<f64>) -> f64 {
        0.5 * (self.a.norm_squared() + 3.0) - (self.a.transpose() * r).trace()
    }

    /// `(A^T R - R^T A)^vee`.
    pub fn grad_matrix(&self, r: &Matrix3<f64>) -> Vector3<f64> {
        let m = self.a.transpose() * r;
        vee_unchecked(&(m - m.transpose()))
    }

    /// Closed-form minimizer `U diag(1, 1, det(U V)) V^T` and its cost.
    pub fn optimum(&self) -> Result<(Matrix3<f64>, f64)> {
        let svd = self.a.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(Error::Degenerate("SVD of A failed".into())),
        };
        let s = svd.singular_values;
        if s.min() <= 1e-12 * s.max().max(f64::MIN_POSITIVE) {
            return Err(Error::Degenerate(format!(
                "A is rank deficient (singular values {:?})",
                s.as_slice()
            )));
        }
        let d = (u.determinant() * v_t.determinant()).signum();
        let r = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t;
        Ok((r, self.eval_matrix(&r)))
    }

    pub fn optimal_rotation(&self) -> Option<&Matrix3<f64>> {
        self.optimum.as_ref().map(|(r, _)| r)
    }
}

fn rotation_of(g: &GroupPoint) -> Result<&Matrix3<f64>> {
    match g {
        GroupPoint::So3(r) => Ok(r),
        _ => Err(Error::InvalidInput(format!(
            "Wahba objective evaluated on {:?}",
            g.kind()
        ))),
    }
}

impl Objective for WahbaProblem {
    fn kind(&self) -> GroupKind {
        GroupKind::So3
    }

    fn value(&self, g: &GroupPoint) -> Result<f64> {
        Ok(self.eval_matrix(rotation_of(g)?))
    }

    fn gradient(&self, g: &GroupPoint) -> Result<AlgebraVector> {
        Ok(AlgebraVector::from_vector3(
            &self.grad_matrix(rotation_of(g)?),
        ))
    }

    fn optimum_value(&self) -> Option<f64> {
        self.optimum.map(|(_, f)| f)
    }
}

/// Matrix with i.i.d. entries uniform on `[0, 1]`, drawn row by row.
pub fn random_wahba_matrix<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let mut a = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            a[(i, j)] = rng.random_range(0.0..=1.0);
        }
    }
    a
}

/// Uniformly distributed unit vector.
pub(crate) fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `R* exp(angle u)` for a uniformly random unit axis `u`.
pub fn initial_rotation<R: Rng + ?Sized>(
    target: &Matrix3<f64>,
    angle: f64,
    rng: &mut R,
) -> Result<Matrix3<f64>> {
    if !(0.0..std::f64::consts::PI).contains(&angle) {
        return Err(Error::Domain(format!(
            "initial rotation angle {angle} outside [0, pi)"
        )));
    }
    let axis = random_axis(rng);
    Ok(target * exp_so3(&(axis * angle)))
}
