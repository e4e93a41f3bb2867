//! Feature files: intrinsics, pixel/world correspondences and an optional ground truth.
//!
//! ```toml
//! K = [500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0]
//!
//! [[features]]
//! pixel = [310.5, 200.25]
//! world = [0.4, -1.0, 12.0]
//!
//! [ground_truth]
//! rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
//! translation = [0.0, 0.0, 0.0]
//! ```
//!
//! Matrices are row-major. Ingestion only checks the schema; the feature count and the
//! intrinsics are checked when a pose problem is built from the scene.

use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{CameraScene, Feature, Pose};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureFile {
    #[serde(rename = "K")]
    k: Vec<f64>,
    features: Vec<FeatureEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruthEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureEntry {
    pixel: Vec<f64>,
    world: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthEntry {
    rotation: Vec<f64>,
    translation: Vec<f64>,
}

fn row_major(m: &Matrix3<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn check_len(origin: &str, field: &str, values: &[f64], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::Parse(format!(
            "{origin}: `{field}` needs {n} values, found {}",
            values.len()
        )));
    }
    Ok(())
}

/// Parses feature-file text. `origin` names the source in error messages.
pub fn parse_features(text: &str, origin: &str) -> Result<CameraScene> {
    let file: FeatureFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {e}")))?;
    check_len(origin, "K", &file.k, 9)?;
    let mut features = Vec::with_capacity(file.features.len());
    for (i, f) in file.features.iter().enumerate() {
        check_len(origin, &format!("features[{i}].pixel"), &f.pixel, 2)?;
        check_len(origin, &format!("features[{i}].world"), &f.world, 3)?;
        features.push(Feature {
            pixel: Vector2::from_column_slice(&f.pixel),
            world: Vector3::from_column_slice(&f.world),
        });
    }
    let ground_truth = match file.ground_truth {
        Some(gt) => {
            check_len(origin, "ground_truth.rotation", &gt.rotation, 9)?;
            check_len(origin, "ground_truth.translation", &gt.translation, 3)?;
            Some(Pose::new(
                Matrix3::from_row_slice(&gt.rotation),
                Vector3::from_column_slice(&gt.translation),
            ))
        }
        None => None,
    };
    Ok(CameraScene {
        intrinsics: Matrix3::from_row_slice(&file.k),
        features,
        ground_truth,
    })
}

pub fn ingest_features(path: &Path) -> Result<CameraScene> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_features(&text, &path.display().to_string())
}

pub fn features_to_string(scene: &CameraScene) -> Result<String> {
    let file = FeatureFile {
        k: row_major(&scene.intrinsics),
        features: scene
            .features
            .iter()
            .map(|f| FeatureEntry {
                pixel: f.pixel.as_slice().to_vec(),
                world: f.world.as_slice().to_vec(),
            })
            .collect(),
        ground_truth: scene.ground_truth.as_ref().map(|p| GroundTruthEntry {
            rotation: row_major(&p.rotation),
            translation: p.translation.as_slice().to_vec(),
        }),
    };
    toml::to_string(&file).map_err(|e| Error::Parse(format!("feature file: {e}")))
}

pub fn write_features(scene: &CameraScene, path: &Path) -> Result<()> {
    std::fs::write(path, features_to_string(scene)?)?;
    Ok(())
}
