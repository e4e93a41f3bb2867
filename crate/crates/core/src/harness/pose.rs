//! Accuracy summary of a pose-estimation run.

use std::fmt;

use crate::error::{Error, Result};
use crate::harness::run::{Problem, RunOutcome};
use crate::lie::rotation_distance;
use crate::objectives::{GradientMethod, Pose, ReprojectionObjective};

#[derive(Debug, Clone)]
pub struct PoseReport {
    pub features: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Final squared reprojection error per feature, in px^2.
    pub mean_sq_reprojection: f64,
    pub estimate: Pose,
    /// Geodesic rotation error in radians, when the scene has a ground truth.
    pub rotation_error: Option<f64>,
    /// Euclidean translation error, when the scene has a ground truth.
    pub translation_error: Option<f64>,
}

pub fn pose_report(problem: &Problem, outcome: &RunOutcome) -> Result<PoseReport> {
    let scene = problem
        .scene
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("not a pose problem".into()))?;
    let objective = ReprojectionObjective::new(scene.clone(), GradientMethod::Analytic);
    let estimate = Pose::from_group_point(&outcome.final_point)?;
    let final_cost = objective.eval_pose(&estimate)?;
    let initial_cost = objective.eval_pose(&Pose::from_group_point(&problem.g0)?)?;
    let truth = scene.ground_truth.as_ref();
    Ok(PoseReport {
        features: scene.features.len(),
        initial_cost,
        final_cost,
        mean_sq_reprojection: final_cost / scene.features.len() as f64,
        rotation_error: truth.map(|t| rotation_distance(&t.rotation, &estimate.rotation)),
        translation_error: truth.map(|t| (t.translation - estimate.translation).norm()),
        estimate,
    })
}

impl fmt::Display for PoseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "features              {}", self.features)?;
        writeln!(f, "initial cost          {:.6e}", self.initial_cost)?;
        writeln!(f, "final cost            {:.6e}", self.final_cost)?;
        writeln!(
            f,
            "mean sq reprojection  {:.6e} px^2",
            self.mean_sq_reprojection
        )?;
        if let (Some(r), Some(x)) = (self.rotation_error, self.translation_error) {
            writeln!(f, "rotation error        {r:.6e} rad")?;
            writeln!(f, "translation error     {x:.6e}")?;
        }
        let r = &self.estimate.rotation;
        let x = &self.estimate.translation;
        writeln!(
            f,
            "rotation              {:.9} {:.9} {:.9}",
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)]
        )?;
        writeln!(
            f,
            "                      {:.9} {:.9} {:.9}",
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)]
        )?;
        writeln!(
            f,
            "                      {:.9} {:.9} {:.9}",
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)]
        )?;
        write!(f, "translation           {:.9} {:.9} {:.9}", x.x, x.y, x.z)
    }
}
