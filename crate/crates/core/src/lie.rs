//! Group and algebra primitives for SO(3), R^n and the direct product SO(3) x R^n.
//!
//! Algebra elements are stored as flat coordinate vectors. For the product group the
//! rotational block comes first: `[omega_x, omega_y, omega_z, v_1, ..., v_n]`. The dual
//! algebra is identified with the algebra through the standard dot product, so momenta
//! use the same [`AlgebraVector`] type.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Tolerance on `|R^T R - I|_F` accepted when constructing a rotation.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-12;
/// Tolerance on `|det R - 1|` accepted when constructing a rotation.
pub const DETERMINANT_TOLERANCE: f64 = 1e-9;
/// Tolerance on `|S + S^T|_F` accepted by [`vee`].
pub const SKEW_TOLERANCE: f64 = 1e-10;
/// Below this angle the Rodrigues coefficients switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;
/// The logarithm refuses rotations whose angle is closer than this to pi.
pub const LOG_PI_MARGIN: f64 = 1e-6;

/// Which group a point or algebra vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKind {
    So3,
    Rn(usize),
    /// SO(3) x R^n.
    Product(usize),
}

impl GroupKind {
    /// Dimension of the Lie algebra.
    pub fn algebra_dim(self) -> usize {
        match self {
            GroupKind::So3 => 3,
            GroupKind::Rn(n) => n,
            GroupKind::Product(n) => 3 + n,
        }
    }

    pub fn has_rotation(self) -> bool {
        !matches!(self, GroupKind::Rn(_))
    }

    /// Dimension of the vector-space factor (0 for pure SO(3)).
    pub fn linear_dim(self) -> usize {
        match self {
            GroupKind::So3 => 0,
            GroupKind::Rn(n) | GroupKind::Product(n) => n,
        }
    }

    /// Offset of the vector-space block inside an algebra vector.
    pub fn linear_offset(self) -> usize {
        if self.has_rotation() {
            3
        } else {
            0
        }
    }
}

/// Coordinates of an element of the Lie algebra (or, via the dot pairing, its dual).
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector(pub DVector<f64>);

impl AlgebraVector {
    pub fn zeros(dim: usize) -> Self {
        AlgebraVector(DVector::zeros(dim))
    }

    pub fn from_slice(values: &[f64]) -> Self {
        AlgebraVector(DVector::from_column_slice(values))
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        AlgebraVector(DVector::from_vec(values))
    }

    pub fn from_vector3(v: &Vector3<f64>) -> Self {
        Self::from_slice(v.as_slice())
    }

    /// Concatenates an optional rotational block with a vector-space block.
    pub fn from_blocks(rotation: Option<&Vector3<f64>>, linear: &[f64]) -> Self {
        let mut values = Vec::with_capacity(3 + linear.len());
        if let Some(w) = rotation {
            values.extend_from_slice(w.as_slice());
        }
        values.extend_from_slice(linear);
        Self::from_vec(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dot(&self, other: &AlgebraVector) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// The first three coordinates as a 3-vector. Panics if fewer than three exist.
    pub fn head3(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    /// Rotational block for groups with an SO(3) factor.
    pub fn rotation_part(&self, kind: GroupKind) -> Option<Vector3<f64>> {
        kind.has_rotation().then(|| self.head3())
    }

    /// Vector-space block (empty for pure SO(3)).
    pub fn linear_part(&self, kind: GroupKind) -> &[f64] {
        &self.0.as_slice()[kind.linear_offset()..]
    }

    pub fn scale(&self, s: f64) -> AlgebraVector {
        AlgebraVector(&self.0 * s)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &AlgebraVector) -> AlgebraVector {
        AlgebraVector(&self.0 + &other.0 * s)
    }
}

impl Index<usize> for AlgebraVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &AlgebraVector {
    type Output = AlgebraVector;
    fn add(self, rhs: &AlgebraVector) -> AlgebraVector {
        AlgebraVector(&self.0 + &rhs.0)
    }
}

impl Add for AlgebraVector {
    type Output = AlgebraVector;
    fn add(self, rhs: AlgebraVector) -> AlgebraVector {
        AlgebraVector(self.0 + rhs.0)
    }
}

impl AddAssign<&AlgebraVector> for AlgebraVector {
    fn add_assign(&mut self, rhs: &AlgebraVector) {
        self.0 += &rhs.0;
    }
}

impl Sub for &AlgebraVector {
    type Output = AlgebraVector;
    fn sub(self, rhs: &AlgebraVector) -> AlgebraVector {
        AlgebraVector(&self.0 - &rhs.0)
    }
}

impl Sub for AlgebraVector {
    type Output = AlgebraVector;
    fn sub(self, rhs: AlgebraVector) -> AlgebraVector {
        AlgebraVector(self.0 - rhs.0)
    }
}

impl Neg for AlgebraVector {
    type Output = AlgebraVector;
    fn neg(self) -> AlgebraVector {
        AlgebraVector(-self.0)
    }
}

impl Mul<f64> for &AlgebraVector {
    type Output = AlgebraVector;
    fn mul(self, s: f64) -> AlgebraVector {
        AlgebraVector(&self.0 * s)
    }
}

impl Mul<f64> for AlgebraVector {
    type Output = AlgebraVector;
    fn mul(self, s: f64) -> AlgebraVector {
        AlgebraVector(self.0 * s)
    }
}

/// Skew-symmetric matrix with `hat(v) * w = v x w`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices that are not skew within [`SKEW_TOLERANCE`].
pub fn vee(s: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let asym = (s + s.transpose()).norm();
    if !(asym <= SKEW_TOLERANCE) {
        return Err(Error::InvalidInput(format!(
            "vee: matrix is not skew-symmetric (|S + S^T|_F = {asym:e})"
        )));
    }
    Ok(vee_unchecked(s))
}

/// Reads the skew coordinates without checking symmetry.
#[inline]
pub fn vee_unchecked(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
}

/// Rodrigues coefficients `sin(t)/t` and `(1 - cos(t))/t^2`.
fn rodrigues_coefficients(angle: f64) -> (f64, f64) {
    if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        (1.0 - a2 / 6.0, 0.5 - a2 / 24.0)
    } else {
        (angle.sin() / angle, (1.0 - angle.cos()) / (angle * angle))
    }
}

/// Exponential map so(3) -> SO(3) (closed-form Rodrigues formula).
pub fn exp_so3(v: &Vector3<f64>) -> Matrix3<f64> {
    let (a, b) = rodrigues_coefficients(v.norm());
    let k = hat(v);
    Matrix3::identity() + k * a + k * k * b
}

/// Logarithm SO(3) -> so(3) with rotation angle in `[0, pi)`.
///
/// Angles within [`LOG_PI_MARGIN`] of pi return [`Error::LogBranch`] since the axis sign is
/// not determined there.
pub fn log_so3(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    // sin(angle) * axis
    let w = vee_unchecked(&(r - r.transpose())) * 0.5;
    let s = w.norm();
    let c = 0.5 * (r.trace() - 1.0);
    let angle = s.atan2(c);
    if PI - angle < LOG_PI_MARGIN {
        return Err(Error::LogBranch { angle });
    }
    if angle < SMALL_ANGLE {
        return Ok(w * (1.0 + angle * angle / 6.0));
    }
    if c > 0.0 {
        return Ok(w * (angle / s));
    }
    // Large angles: recover the axis from the symmetric part, (1 - c) u u^T.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * c;
    let i = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let col: Vector3<f64> = b.column(i).into_owned();
    let mut axis = col / col.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * angle)
}

/// `|R^T R - I|_F`.
pub fn orthogonality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Geodesic distance on SO(3), `|log(A^T B)|`, valid for all angles including pi.
pub fn rotation_distance(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let s = (vee_unchecked(&(rel - rel.transpose())) * 0.5).norm();
    let c = 0.5 * (rel.trace() - 1.0);
    s.atan2(c)
}

fn check_rotation(m: &Matrix3<f64>) -> Result<()> {
    let ortho = orthogonality_error(m);
    let det = m.determinant();
    if !(ortho <= ORTHOGONALITY_TOLERANCE) || !((det - 1.0).abs() <= DETERMINANT_TOLERANCE) {
        return Err(Error::InvalidInput(format!(
            "matrix is not a rotation (|R^T R - I|_F = {ortho:e}, det = {det})"
        )));
    }
    Ok(())
}

/// A point of SO(3), R^n, or SO(3) x R^n.
///
/// The variants are public so steppers can carry matrices that have drifted off the
/// group (embedded Runge-Kutta baselines); [`GroupPoint::so3`] and
/// [`GroupPoint::product`] check the rotation invariants.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupPoint {
    So3(Matrix3<f64>),
    Rn(DVector<f64>),
    Product(Matrix3<f64>, DVector<f64>),
}

impl GroupPoint {
    pub fn so3(r: Matrix3<f64>) -> Result<Self> {
        check_rotation(&r)?;
        Ok(GroupPoint::So3(r))
    }

    pub fn rn(x: DVector<f64>) -> Self {
        GroupPoint::Rn(x)
    }

    pub fn product(r: Matrix3<f64>, x: DVector<f64>) -> Result<Self> {
        check_rotation(&r)?;
        Ok(GroupPoint::Product(r, x))
    }

    pub fn identity(kind: GroupKind) -> Self {
        match kind {
            GroupKind::So3 => GroupPoint::So3(Matrix3::identity()),
            GroupKind::Rn(n) => GroupPoint::Rn(DVector::zeros(n)),
            GroupKind::Product(n) => GroupPoint::Product(Matrix3::identity(), DVector::zeros(n)),
        }
    }

    pub fn kind(&self) -> GroupKind {
        match self {
            GroupPoint::So3(_) => GroupKind::So3,
            GroupPoint::Rn(x) => GroupKind::Rn(x.len()),
            GroupPoint::Product(_, x) => GroupKind::Product(x.len()),
        }
    }

    pub fn rotation(&self) -> Option<&Matrix3<f64>> {
        match self {
            GroupPoint::So3(r) | GroupPoint::Product(r, _) => Some(r),
            GroupPoint::Rn(_) => None,
        }
    }

    pub fn translation(&self) -> Option<&DVector<f64>> {
        match self {
            GroupPoint::Rn(x) | GroupPoint::Product(_, x) => Some(x),
            GroupPoint::So3(_) => None,
        }
    }

    /// Group product `self * other`; componentwise for the product group.
    pub fn compose(&self, other: &GroupPoint) -> Result<GroupPoint> {
        match (self, other) {
            (GroupPoint::So3(a), GroupPoint::So3(b)) => Ok(GroupPoint::So3(a * b)),
            (GroupPoint::Rn(a), GroupPoint::Rn(b)) if a.len() == b.len() => {
                Ok(GroupPoint::Rn(a + b))
            }
            (GroupPoint::Product(ra, xa), GroupPoint::Product(rb, xb)) if xa.len() == xb.len() => {
                Ok(GroupPoint::Product(ra * rb, xa + xb))
            }
            _ => Err(mismatch(self.kind(), other.kind())),
        }
    }

    pub fn inverse(&self) -> GroupPoint {
        match self {
            GroupPoint::So3(r) => GroupPoint::So3(r.transpose()),
            GroupPoint::Rn(x) => GroupPoint::Rn(-x),
            GroupPoint::Product(r, x) => GroupPoint::Product(r.transpose(), -x),
        }
    }

    /// Group exponential of an algebra vector of the given kind.
    pub fn exp(kind: GroupKind, eta: &AlgebraVector) -> Result<GroupPoint> {
        check_dim(kind, eta)?;
        Ok(match kind {
            GroupKind::So3 => GroupPoint::So3(exp_so3(&eta.head3())),
            GroupKind::Rn(_) => GroupPoint::Rn(eta.0.clone()),
            GroupKind::Product(_) => GroupPoint::Product(
                exp_so3(&eta.head3()),
                DVector::from_column_slice(eta.linear_part(kind)),
            ),
        })
    }

    /// `self * exp(eta)`, the left-trivialized retraction used for perturbations.
    pub fn retract(&self, eta: &AlgebraVector) -> Result<GroupPoint> {
        self.compose(&GroupPoint::exp(self.kind(), eta)?)
    }

    /// `|R^T R - I|_F` of the rotational factor (0 for R^n).
    pub fn orthogonality_error(&self) -> f64 {
        self.rotation().map_or(0.0, orthogonality_error)
    }
}

fn mismatch(a: GroupKind, b: GroupKind) -> Error {
    Error::InvalidInput(format!("group kind mismatch: {a:?} vs {b:?}"))
}

fn check_dim(kind: GroupKind, v: &AlgebraVector) -> Result<()> {
    if v.len() != kind.algebra_dim() {
        return Err(Error::InvalidInput(format!(
            "algebra vector of length {} does not match {kind:?}",
            v.len()
        )));
    }
    Ok(())
}

/// `Ad_F eta`: rotates the so(3) block by `F`, identity on R^n.
pub fn adjoint(f: &GroupPoint, eta: &AlgebraVector) -> Result<AlgebraVector> {
    let kind = f.kind();
    check_dim(kind, eta)?;
    Ok(match f.rotation() {
        Some(r) => AlgebraVector::from_blocks(Some(&(r * eta.head3())), eta.linear_part(kind)),
        None => eta.clone(),
    })
}

/// `Ad*_F mu`: rotates the so(3)* block by `F^T`, identity on R^n.
pub fn coadjoint(f: &GroupPoint, mu: &AlgebraVector) -> Result<AlgebraVector> {
    let kind = f.kind();
    check_dim(kind, mu)?;
    Ok(match f.rotation() {
        Some(r) => {
            AlgebraVector::from_blocks(Some(&(r.transpose() * mu.head3())), mu.linear_part(kind))
        }
        None => mu.clone(),
    })
}

/// `ad*_xi mu`: `mu x xi` on so(3), zero on the abelian R^n block.
pub fn coad_star(kind: GroupKind, xi: &AlgebraVector, mu: &AlgebraVector) -> Result<AlgebraVector> {
    check_dim(kind, xi)?;
    check_dim(kind, mu)?;
    let zeros = vec![0.0; kind.linear_dim()];
    Ok(if kind.has_rotation() {
        AlgebraVector::from_blocks(Some(&mu.head3().cross(&xi.head3())), &zeros)
    } else {
        AlgebraVector::from_vec(zeros)
    })
}

/// Symmetric positive-definite metric `J` on the algebra, block diagonal for products.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricOperator {
    kind: GroupKind,
    rotation: Matrix3<f64>,
    rotation_inv: Matrix3<f64>,
    linear: DMatrix<f64>,
    linear_inv: DMatrix<f64>,
}

impl MetricOperator {
    pub fn identity(kind: GroupKind) -> Self {
        let n = kind.linear_dim();
        MetricOperator {
            kind,
            rotation: Matrix3::identity(),
            rotation_inv: Matrix3::identity(),
            linear: DMatrix::identity(n, n),
            linear_inv: DMatrix::identity(n, n),
        }
    }

    /// Metric with the given blocks. `rotation` is ignored for R^n and `linear` for SO(3).
    pub fn new(kind: GroupKind, rotation: Matrix3<f64>, linear: DMatrix<f64>) -> Result<Self> {
        let n = kind.linear_dim();
        if linear.nrows() != n || linear.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "linear metric block is {}x{}, expected {n}x{n}",
                linear.nrows(),
                linear.ncols()
            )));
        }
        let rotation = if kind.has_rotation() {
            rotation
        } else {
            Matrix3::identity()
        };
        let rotation_inv = spd_inverse(&DMatrix::from_column_slice(3, 3, rotation.as_slice()))?;
        let linear_inv = if n > 0 {
            spd_inverse(&linear)?
        } else {
            DMatrix::zeros(0, 0)
        };
        Ok(MetricOperator {
            kind,
            rotation,
            rotation_inv: Matrix3::from_column_slice(rotation_inv.as_slice()),
            linear,
            linear_inv,
        })
    }

    pub fn so3(j: Matrix3<f64>) -> Result<Self> {
        Self::new(GroupKind::So3, j, DMatrix::zeros(0, 0))
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn rotation_block(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn linear_block(&self) -> &DMatrix<f64> {
        &self.linear
    }

    /// `J_d = tr(J)/2 I - J` for the SO(3) block.
    pub fn rotation_jd(&self) -> Matrix3<f64> {
        Matrix3::identity() * (0.5 * self.rotation.trace()) - self.rotation
    }

    /// `Some(c)` when the SO(3) block is exactly `c I`.
    pub fn scalar_rotation(&self) -> Option<f64> {
        let c = self.rotation[(0, 0)];
        (self.rotation == Matrix3::identity() * c).then_some(c)
    }

    pub fn apply(&self, xi: &AlgebraVector) -> AlgebraVector {
        self.blockwise(xi, &self.rotation, &self.linear)
    }

    pub fn apply_inverse(&self, mu: &AlgebraVector) -> AlgebraVector {
        self.blockwise(mu, &self.rotation_inv, &self.linear_inv)
    }

    /// `<J xi, zeta>`.
    pub fn pair(&self, xi: &AlgebraVector, zeta: &AlgebraVector) -> f64 {
        self.apply(xi).dot(zeta)
    }

    fn blockwise(
        &self,
        v: &AlgebraVector,
        rot: &Matrix3<f64>,
        lin: &DMatrix<f64>,
    ) -> AlgebraVector {
        let kind = self.kind;
        let linear = v.linear_part(kind);
        let mapped = if linear.is_empty() {
            Vec::new()
        } else {
            (lin * DVector::from_column_slice(linear))
                .as_slice()
                .to_vec()
        };
        let rotation = kind.has_rotation().then(|| rot * v.head3());
        AlgebraVector::from_blocks(rotation.as_ref(), &mapped)
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-12 * m.norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "metric is not symmetric (|J - J^T|_F = {asym:e})"
        )));
    }
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidInput("metric is not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;
    use proptest::prelude::*;

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&Vector3::zeros()), Matrix3::zeros());
        let expected = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(hat(&Vector3::x()), expected);
    }

    #[test]
    fn vee_examples() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
        assert_eq!(vee(&Matrix3::zeros()).unwrap(), Vector3::zeros());
        assert!(matches!(
            vee(&Matrix3::identity()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(exp_so3(&Vector3::zeros()), Matrix3::identity());
        let r = exp_so3(&Vector3::new(0.0, 0.0, PI / 2.0));
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_small_angle_branch_is_continuous() {
        let v = Vector3::new(3e-9, -2e-9, 1e-9);
        let above = Vector3::new(3e-8, -2e-8, 1e-8);
        let series = |v: &Vector3<f64>| Matrix3::identity() + hat(v) + hat(v) * hat(v) * 0.5;
        assert_relative_eq!(exp_so3(&v), series(&v), epsilon = 1e-16);
        assert_relative_eq!(exp_so3(&above), series(&above), epsilon = 1e-15);
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_so3(&Matrix3::identity()).unwrap(), Vector3::zeros());
        let v = Vector3::new(0.1, -0.2, 0.3);
        assert_relative_eq!(log_so3(&exp_so3(&v)).unwrap(), v, epsilon = 1e-10);
    }

    #[test]
    fn log_near_pi_is_an_error() {
        let r = exp_so3(&Vector3::new(0.0, PI - 1e-8, 0.0));
        assert!(matches!(log_so3(&r), Err(Error::LogBranch { .. })));
        let r = exp_so3(&Vector3::new(0.0, 0.0, PI));
        assert!(matches!(log_so3(&r), Err(Error::LogBranch { .. })));
    }

    #[test]
    fn log_close_to_pi_round_trips() {
        let axis = Vector3::new(1.0, -2.0, 0.5).normalize();
        for angle in [0.9 * PI, PI - 1e-3, PI - 1e-5] {
            let r = exp_so3(&(axis * angle));
            let v = log_so3(&r).unwrap();
            assert_relative_eq!(v.norm(), angle, epsilon = 1e-9);
            assert_relative_eq!(exp_so3(&v), r, epsilon = 1e-9);
        }
    }

    #[test]
    fn compose_examples() {
        let r = GroupPoint::so3(exp_so3(&Vector3::new(0.3, 0.1, -0.7))).unwrap();
        let id = GroupPoint::identity(GroupKind::So3);
        assert_eq!(r.compose(&id).unwrap(), r);
        let back = r.compose(&r.inverse()).unwrap();
        assert_relative_eq!(
            *back.rotation().unwrap(),
            Matrix3::identity(),
            epsilon = 1e-12
        );

        let a = GroupPoint::rn(DVector::from_vec(vec![1.0, 2.0]));
        let b = GroupPoint::rn(DVector::from_vec(vec![3.0, 4.0]));
        assert_eq!(
            a.compose(&b).unwrap(),
            GroupPoint::rn(DVector::from_vec(vec![4.0, 6.0]))
        );
        let c = GroupPoint::rn(DVector::from_vec(vec![3.0]));
        assert!(a.compose(&c).is_err());
        assert!(a.compose(&r).is_err());
    }

    #[test]
    fn so3_constructor_rejects_non_rotations() {
        assert!(GroupPoint::so3(Matrix3::identity() * 1.01).is_err());
        let reflection = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(GroupPoint::so3(reflection).is_err());
    }

    #[test]
    fn product_composition_is_componentwise() {
        let r1 = exp_so3(&Vector3::new(0.1, 0.2, 0.3));
        let r2 = exp_so3(&Vector3::new(-0.4, 0.0, 0.2));
        let a = GroupPoint::product(r1, DVector::from_vec(vec![1.0, 0.0, 2.0])).unwrap();
        let b = GroupPoint::product(r2, DVector::from_vec(vec![0.5, 1.0, -1.0])).unwrap();
        let c = a.compose(&b).unwrap();
        assert_eq!(*c.rotation().unwrap(), r1 * r2);
        assert_eq!(c.translation().unwrap().as_slice(), &[1.5, 1.0, 1.0]);
    }

    #[test]
    fn coadjoint_examples() {
        let xi = AlgebraVector::from_slice(&[0.3, -1.0, 2.0]);
        assert_eq!(
            coad_star(GroupKind::So3, &xi, &xi).unwrap(),
            AlgebraVector::zeros(3)
        );
        let id = GroupPoint::identity(GroupKind::So3);
        assert_eq!(adjoint(&id, &xi).unwrap(), xi);
        let bad = AlgebraVector::zeros(4);
        assert!(adjoint(&id, &bad).is_err());
    }

    #[test]
    fn coad_star_sign_convention() {
        // ad*_xi mu = mu x xi
        let xi = AlgebraVector::from_slice(&[1.0, 0.0, 0.0]);
        let mu = AlgebraVector::from_slice(&[0.0, 1.0, 0.0]);
        let out = coad_star(GroupKind::So3, &xi, &mu).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.0, -1.0]);
        let rn = coad_star(
            GroupKind::Rn(2),
            &AlgebraVector::from_slice(&[1.0, 2.0]),
            &AlgebraVector::from_slice(&[3.0, 4.0]),
        )
        .unwrap();
        assert_eq!(rn, AlgebraVector::zeros(2));
    }

    #[test]
    fn metric_jd_and_validation() {
        let j = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
        let m = MetricOperator::so3(j).unwrap();
        assert_eq!(
            m.rotation_jd(),
            Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 0.0))
        );
        assert_eq!(m.scalar_rotation(), None);
        assert_eq!(
            MetricOperator::identity(GroupKind::So3).scalar_rotation(),
            Some(1.0)
        );
        assert!(MetricOperator::so3(-Matrix3::identity()).is_err());
        let asym = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(MetricOperator::so3(asym).is_err());
        let xi = AlgebraVector::from_slice(&[1.0, 1.0, 1.0]);
        assert_relative_eq!(m.apply_inverse(&m.apply(&xi)).0, xi.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn hat_is_cross_product(v in vec3(), w in vec3()) {
            let lhs = hat(&v) * w;
            let rhs = Vector3::new(
                v.y * w.z - v.z * w.y,
                v.z * w.x - v.x * w.z,
                v.x * w.y - v.y * w.x,
            );
            prop_assert!((lhs - rhs).norm() <= 1e-14);
            prop_assert_eq!(hat(&v).transpose(), -hat(&v));
        }

        #[test]
        fn vee_hat_round_trip_is_exact(v in vec3()) {
            prop_assert_eq!(vee(&hat(&v)).unwrap(), v);
        }

        #[test]
        fn exp_matches_power_series(v in vec3()) {
            prop_assume!(v.norm() <= 3.0);
            let k = hat(&v);
            let mut term = Matrix3::identity();
            let mut sum = Matrix3::identity();
            for n in 1..30 {
                term = term * k / n as f64;
                sum += term;
            }
            prop_assert!((exp_so3(&v) - sum).norm() <= 1e-10);
        }

        #[test]
        fn exp_inverse_and_orthogonality(v in vec3()) {
            let r = exp_so3(&v);
            prop_assert!((r * exp_so3(&-v) - Matrix3::identity()).norm() <= 1e-12);
            prop_assert!(orthogonality_error(&r) <= 1e-12);
        }

        #[test]
        fn log_matches_quaternion_oracle(v in vec3()) {
            prop_assume!(v.norm() < PI - 1e-3);
            let r = exp_so3(&v);
            let q = UnitQuaternion::from_matrix(&r);
            let oracle = q.scaled_axis();
            let got = log_so3(&r).unwrap();
            prop_assert!((got - oracle).norm() <= 1e-9);
            prop_assert!((exp_so3(&got) - r).norm() <= 1e-9);
        }

        #[test]
        fn pairing_identity(a in vec3(), b in vec3()) {
            let lhs = 0.5 * (hat(&a).transpose() * hat(&b)).trace();
            prop_assert!((lhs - a.dot(&b)).abs() <= 1e-12);
        }

        #[test]
        fn coadjoint_inverts_adjoint(v in vec3(), e in vec3()) {
            let f = GroupPoint::So3(exp_so3(&v));
            let eta = AlgebraVector::from_vector3(&e);
            let back = coadjoint(&f, &adjoint(&f, &eta).unwrap()).unwrap();
            prop_assert!((back.0 - eta.0).norm() <= 1e-13);
        }

        #[test]
        fn metric_is_positive(d in (0.1..5.0f64, 0.1..5.0f64, 0.1..5.0f64), v in vec3(), x in vec3()) {
            prop_assume!(x.norm() > 1e-6);
            let q = exp_so3(&v);
            let j = q * Matrix3::from_diagonal(&Vector3::new(d.0, d.1, d.2)) * q.transpose();
            let j = (j + j.transpose()) * 0.5;
            let m = MetricOperator::so3(j).unwrap();
            let xi = AlgebraVector::from_vector3(&x);
            prop_assert!(m.pair(&xi, &xi) > 0.0);
        }
    }

    #[test]
    fn long_composition_chain_stays_orthogonal() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r = Matrix3::identity();
        for _ in 0..10_000 {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            r *= exp_so3(&v);
            assert!(orthogonality_error(&r) <= 1e-11);
        }
    }
}
