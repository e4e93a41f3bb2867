//! Seeded problem fixtures shared by the benchmarks.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lgvi::objectives::{
    initial_rotation, perturb_pose, random_wahba_matrix, synth_scene, GradientMethod, Pose,
    ReprojectionObjective, WahbaProblem, DEFAULT_INTRINSICS,
};
use lgvi::GroupPoint;

/// Wahba problem and a start far from its optimum.
pub fn wahba(seed: u64) -> (WahbaProblem, GroupPoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = WahbaProblem::new(random_wahba_matrix(&mut rng));
    let (r_star, _) = w.optimum().expect("svd");
    let r0 = initial_rotation(&r_star, 0.9 * PI, &mut rng).expect("angle below pi");
    (w, GroupPoint::So3(r0))
}

/// Synthetic camera scene with `n` features and a perturbed starting pose.
pub fn pose(seed: u64, n: usize, gradient: GradientMethod) -> (ReprojectionObjective, GroupPoint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = Pose::new(
        lgvi::lie::exp_so3(&nalgebra::Vector3::new(0.2, -0.1, 0.3)),
        nalgebra::Vector3::new(0.1, 0.2, -0.3),
    );
    let k = Matrix3::from_row_slice(&DEFAULT_INTRINSICS);
    let scene = synth_scene(n, &truth, &k, &mut rng).expect("scene");
    let start = perturb_pose(&truth, 0.3, 0.5, &mut rng).to_group_point();
    (ReprojectionObjective::new(scene, gradient), start)
}
