//! Experiment orchestration: configs, seeded runs, trajectory CSVs, rate fits, comparisons,
//! sweeps and feature files.

pub mod compare;
pub mod config;
pub mod features;
pub mod pose;
pub mod rates;
pub mod run;
pub mod sweep;

pub use compare::{compare_integrators, ComparisonReport, MethodSummary};
pub use config::{split_override, ExperimentConfig, GroupName, Method, ObjectiveKind};
pub use features::{ingest_features, parse_features, write_features};
pub use pose::{pose_report, PoseReport};
pub use rates::{final_decade, fit_rate, fit_records, RateSeries};
pub use run::{
    read_trajectory_csv, run_experiment, run_problem, seeded_synthetic_scene, synthetic_scene,
    Problem, RunOutcome, TrajectoryRecord, CSV_HEADER,
};
pub use sweep::{run_sweep, SweepRow, SweepSpec};
