//! Pinhole camera model and the reprojection-error cost on SO(3) x R^3.

use nalgebra::{DVector, Matrix2x3, Matrix3, Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{exp_so3, hat, AlgebraVector, GroupKind, GroupPoint};
use crate::objectives::wahba::random_axis;
use crate::objectives::{finite_difference_gradient, Objective, FD_STEP};

/// Fewest features accepted for a pose problem.
pub const MIN_FEATURES: usize = 6;

/// Synthetic intrinsics: focal length 500 px, principal point (320, 240).
pub const DEFAULT_INTRINSICS: [f64; 9] = [500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0];

/// Camera pose `(R, x)` mapping world points to camera coordinates `R P + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn to_group_point(&self) -> GroupPoint {
        GroupPoint::Product(
            self.rotation,
            DVector::from_column_slice(self.translation.as_slice()),
        )
    }

    pub fn from_group_point(g: &GroupPoint) -> Result<Pose> {
        match g {
            GroupPoint::Product(r, x) if x.len() == 3 => {
                Ok(Pose::new(*r, Vector3::new(x[0], x[1], x[2])))
            }
            _ => Err(Error::InvalidInput(format!(
                "pose needs a point of SO(3) x R^3, got {:?}",
                g.kind()
            ))),
        }
    }
}

/// One correspondence: observed pixel and the 3D world point that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub pixel: Vector2<f64>,
    pub world: Vector3<f64>,
}

/// Intrinsics, correspondences and (optionally) the pose that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraScene {
    pub intrinsics: Matrix3<f64>,
    pub features: Vec<Feature>,
    pub ground_truth: Option<Pose>,
}

impl CameraScene {
    /// Checks the intrinsics and that the scene has enough features to solve for a pose.
    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        let upper = k[(1, 0)] == 0.0 && k[(2, 0)] == 0.0 && k[(2, 1)] == 0.0;
        let positive = k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0;
        if !upper || !positive {
            return Err(Error::InvalidInput(
                "intrinsics must be upper triangular with a positive diagonal".into(),
            ));
        }
        if self.features.len() < MIN_FEATURES {
            return Err(Error::Degenerate(format!(
                "pose estimation needs at least {MIN_FEATURES} features, scene has {}",
                self.features.len()
            )));
        }
        Ok(())
    }
}

/// Homogeneous image point `K (R P + x)`; errors when the point is not in front of the camera.
fn homogeneous(pose: &Pose, k: &Matrix3<f64>, world: &Vector3<f64>) -> Result<Vector3<f64>> {
    let y = k * (pose.rotation * world + pose.translation);
    if !(y.z > 0.0) {
        return Err(Error::BehindCamera {
            index: 0,
            depth: y.z,
        });
    }
    Ok(y)
}

/// Projects a world point to pixel coordinates.
pub fn project(pose: &Pose, k: &Matrix3<f64>, world: &Vector3<f64>) -> Result<Vector2<f64>> {
    let y = homogeneous(pose, k, world)?;
    Ok(Vector2::new(y.x / y.z, y.y / y.z))
}

/// How [`ReprojectionObjective`] computes its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Central differences along the six algebra directions.
    #[default]
    FiniteDifference,
    Analytic,
}

/// Sum of squared pixel residuals over all features of a scene.
#[derive(Debug, Clone)]
pub struct ReprojectionObjective {
    pub scene: CameraScene,
    pub method: GradientMethod,
    pub fd_step: f64,
}

impl ReprojectionObjective {
    pub fn new(scene: CameraScene, method: GradientMethod) -> Self {
        ReprojectionObjective {
            scene,
            method,
            fd_step: FD_STEP,
        }
    }

    pub fn eval_pose(&self, pose: &Pose) -> Result<f64> {
        let k = &self.scene.intrinsics;
        let mut sum = 0.0;
        for (index, feature) in self.scene.features.iter().enumerate() {
            let pixel = project(pose, k, &feature.world).map_err(|e| with_index(e, index))?;
            sum += (feature.pixel - pixel).norm_squared();
        }
        Ok(sum)
    }

    /// Chain rule through the projection. Returns `[rotation; translation]`.
    pub fn analytic_gradient(&self, pose: &Pose) -> Result<AlgebraVector> {
        let k = &self.scene.intrinsics;
        let mut g_rot = Vector3::zeros();
        let mut g_x = Vector3::zeros();
        for (index, feature) in self.scene.features.iter().enumerate() {
            let y = homogeneous(pose, k, &feature.world).map_err(|e| with_index(e, index))?;
            let residual = Vector2::new(y.x / y.z, y.y / y.z) - feature.pixel;
            let dproj = Matrix2x3::new(
                1.0 / y.z,
                0.0,
                -y.x / (y.z * y.z),
                0.0,
                1.0 / y.z,
                -y.y / (y.z * y.z),
            );
            // gradient of |residual|^2 w.r.t. camera-frame point
            let w = k.transpose() * dproj.transpose() * residual * 2.0;
            // d(R exp(s eta) P)/ds = -R hat(P) eta
            g_rot += hat(&feature.world) * (pose.rotation.transpose() * w);
            g_x += w;
        }
        Ok(AlgebraVector::from_blocks(Some(&g_rot), g_x.as_slice()))
    }
}

fn with_index(e: Error, index: usize) -> Error {
    match e {
        Error::BehindCamera { depth, .. } => Error::BehindCamera { index, depth },
        other => other,
    }
}

impl Objective for ReprojectionObjective {
    fn kind(&self) -> GroupKind {
        GroupKind::Product(3)
    }

    fn value(&self, g: &GroupPoint) -> Result<f64> {
        self.eval_pose(&Pose::from_group_point(g)?)
    }

    fn gradient(&self, g: &GroupPoint) -> Result<AlgebraVector> {
        match self.method {
            GradientMethod::Analytic => self.analytic_gradient(&Pose::from_group_point(g)?),
            GradientMethod::FiniteDifference => finite_difference_gradient(self, g, self.fd_step),
        }
    }

    fn optimum_value(&self) -> Option<f64> {
        // noiseless synthetic scenes are fit exactly by their generating pose
        self.scene
            .ground_truth
            .as_ref()
            .and_then(|pose| self.eval_pose(pose).ok())
            .filter(|&f| f == 0.0)
    }
}

/// Samples `n` world points whose camera-frame depth lies in `[2, 50]` and whose pixels fall
/// inside the image implied by the principal point, then records their exact projections.
pub fn synth_scene<R: Rng + ?Sized>(
    n: usize,
    pose: &Pose,
    intrinsics: &Matrix3<f64>,
    rng: &mut R,
) -> Result<CameraScene> {
    if n < MIN_FEATURES {
        return Err(Error::InvalidInput(format!(
            "synthetic scene needs at least {MIN_FEATURES} features (asked for {n})"
        )));
    }
    let k_inv = intrinsics
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("intrinsics are singular".into()))?;
    let width = 2.0 * intrinsics[(0, 2)].max(1.0);
    let height = 2.0 * intrinsics[(1, 2)].max(1.0);
    let mut features = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random_range(0.0..width);
        let v = rng.random_range(0.0..height);
        let depth = rng.random_range(2.0..=50.0);
        let ray = k_inv * Vector3::new(u, v, 1.0);
        let camera = ray * (depth / ray.z);
        let world = pose.rotation.transpose() * (camera - pose.translation);
        let pixel = project(pose, intrinsics, &world)?;
        features.push(Feature { pixel, world });
    }
    Ok(CameraScene {
        intrinsics: *intrinsics,
        features,
        ground_truth: Some(pose.clone()),
    })
}

/// Rotates the pose by `angle` about a random axis and shifts it by `offset` in a random
/// direction.
pub fn perturb_pose<R: Rng + ?Sized>(pose: &Pose, angle: f64, offset: f64, rng: &mut R) -> Pose {
    let axis = random_axis(rng);
    let dir = random_axis(rng);
    Pose::new(
        pose.rotation * exp_so3(&(axis * angle)),
        pose.translation + dir * offset,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn default_k() -> Matrix3<f64> {
        Matrix3::from_row_slice(&DEFAULT_INTRINSICS)
    }

    fn identity_pose() -> Pose {
        Pose::new(Matrix3::identity(), Vector3::zeros())
    }

    #[test]
    fn projection_examples() {
        let p = project(
            &identity_pose(),
            &Matrix3::identity(),
            &Vector3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        assert_eq!(p, Vector2::zeros());
        let k = Matrix3::from_diagonal(&Vector3::new(100.0, 100.0, 1.0));
        let p = project(&identity_pose(), &k, &Vector3::new(1.0, 0.0, 2.0)).unwrap();
        assert_eq!(p, Vector2::new(50.0, 0.0));
    }

    #[test]
    fn behind_camera_is_reported_with_index() {
        let k = Matrix3::identity();
        assert!(matches!(
            project(&identity_pose(), &k, &Vector3::new(0.0, 0.0, -1.0)),
            Err(Error::BehindCamera { .. })
        ));
        let scene = CameraScene {
            intrinsics: k,
            features: vec![
                Feature {
                    pixel: Vector2::zeros(),
                    world: Vector3::new(0.0, 0.0, 1.0),
                },
                Feature {
                    pixel: Vector2::zeros(),
                    world: Vector3::new(0.0, 0.0, -2.0),
                },
            ],
            ground_truth: None,
        };
        let obj = ReprojectionObjective::new(scene, GradientMethod::Analytic);
        assert!(matches!(
            obj.eval_pose(&identity_pose()),
            Err(Error::BehindCamera { index: 1, .. })
        ));
    }

    #[test]
    fn single_feature_unit_offset() {
        let scene = CameraScene {
            intrinsics: Matrix3::identity(),
            features: vec![Feature {
                pixel: Vector2::new(1.0, 0.0),
                world: Vector3::new(0.0, 0.0, 1.0),
            }],
            ground_truth: None,
        };
        let obj = ReprojectionObjective::new(scene, GradientMethod::FiniteDifference);
        assert_eq!(obj.eval_pose(&identity_pose()).unwrap(), 1.0);
    }

    #[test]
    fn synthetic_scene_is_exact_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = perturb_pose(&identity_pose(), 0.2, 1.0, &mut rng);
        let a = synth_scene(516, &pose, &default_k(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = synth_scene(516, &pose, &default_k(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.features.len(), 516);
        a.validate().unwrap();
        for f in &a.features {
            let depth = (pose.rotation * f.world + pose.translation).z;
            assert!((2.0 - 1e-9..=50.0 + 1e-9).contains(&depth));
        }
        for method in [GradientMethod::Analytic, GradientMethod::FiniteDifference] {
            let obj = ReprojectionObjective::new(a.clone(), method);
            assert_eq!(obj.eval_pose(&pose).unwrap(), 0.0);
            let gn = obj.gradient(&pose.to_group_point()).unwrap().norm();
            // central differences carry an O(s^2) truncation term from the third derivative
            let bound = match method {
                GradientMethod::Analytic => 1e-8,
                GradientMethod::FiniteDifference => 1e-4,
            };
            assert!(gn <= bound, "{method:?}: {gn:e}");
            assert_eq!(obj.optimum_value(), Some(0.0));
        }
        assert!(synth_scene(5, &pose, &default_k(), &mut rng).is_err());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth = identity_pose();
        let scene = synth_scene(40, &truth, &default_k(), &mut rng).unwrap();
        let obj = ReprojectionObjective::new(scene, GradientMethod::Analytic);
        for _ in 0..50 {
            let pose = perturb_pose(&truth, 0.05, 0.2, &mut rng);
            let g = pose.to_group_point();
            let analytic = obj.analytic_gradient(&pose).unwrap();
            let fd = finite_difference_gradient(&obj, &g, FD_STEP).unwrap();
            let rel = (&analytic.0 - &fd.0).norm() / analytic.norm();
            assert!(rel <= 1e-5, "relative gradient mismatch {rel:e}");
        }
    }

    #[test]
    fn objective_is_additive_over_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = identity_pose();
        let scene = synth_scene(30, &truth, &default_k(), &mut rng).unwrap();
        let pose = perturb_pose(&truth, 0.1, 0.3, &mut rng);
        let base = ReprojectionObjective::new(scene.clone(), GradientMethod::Analytic);
        let f0 = base.eval_pose(&pose).unwrap();
        let mut extended = scene.clone();
        extended.features.push(Feature {
            pixel: Vector2::new(10.0, 20.0),
            world: Vector3::new(0.5, 0.1, 8.0),
        });
        let ext = ReprojectionObjective::new(extended.clone(), GradientMethod::Analytic);
        let extra = ReprojectionObjective::new(
            CameraScene {
                features: extended.features[30..].to_vec(),
                ..scene.clone()
            },
            GradientMethod::Analytic,
        );
        assert_relative_eq!(
            ext.eval_pose(&pose).unwrap(),
            f0 + extra.eval_pose(&pose).unwrap(),
            max_relative = 1e-14
        );
        extended.features.pop();
        let back = ReprojectionObjective::new(extended, GradientMethod::Analytic);
        assert_eq!(back.eval_pose(&pose).unwrap(), f0);
    }

    #[test]
    fn validation_rejects_small_or_bad_scenes() {
        let scene = CameraScene {
            intrinsics: Matrix3::identity(),
            features: vec![Feature {
                pixel: Vector2::zeros(),
                world: Vector3::new(0.0, 0.0, 1.0),
            }],
            ground_truth: None,
        };
        assert!(matches!(scene.validate(), Err(Error::Degenerate(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ok = synth_scene(6, &identity_pose(), &default_k(), &mut rng).unwrap();
        ok.validate().unwrap();
        ok.intrinsics[(1, 0)] = 1.0;
        assert!(matches!(ok.validate(), Err(Error::InvalidInput(_))));
    }
}
