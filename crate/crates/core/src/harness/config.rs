//! Experiment configuration: TOML sections plus `--key=value` overrides.
//!
//! ```toml
//! [problem]
//! objective = "wahba"
//! seed = 1
//!
//! [dynamics]
//! p = 4.0
//!
//! [integrator]
//! method = "lgvi"
//! h0 = 0.1
//!
//! [run]
//! t_final = 3.0
//!
//! [output]
//! path = "p4.csv"
//! ```
//!
//! Overrides name a field either by `section.field` (`integrator.h0=0.01`) or by the bare
//! field name when it is unique across sections (`h0=0.01`). Values use TOML syntax; anything
//! that does not parse as a TOML value is taken as a string.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{EnergySolve, MomentumRule, Rk45Options, SolverOptions};
use crate::lie::{GroupKind, MetricOperator};
use crate::objectives::{GradientMethod, DEFAULT_INTRINSICS};
use crate::BregmanParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// Wahba's attitude problem on SO(3) with a random `A`.
    #[default]
    Wahba,
    /// Reprojection error on SO(3) x R^3, synthetic scene or feature file.
    Pose,
    /// `1/2 (x - c)^T H (x - c)` on R^n.
    Quadratic,
}

impl ObjectiveKind {
    pub fn group_name(self) -> GroupName {
        match self {
            ObjectiveKind::Wahba => GroupName::So3,
            ObjectiveKind::Pose => GroupName::Product,
            ObjectiveKind::Quadratic => GroupName::Rn,
        }
    }
}

/// Group of the optimization variable, without dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupName {
    So3,
    Rn,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Lgvi,
    Elgvi,
    Splt,
    Rk4,
    Rk45,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lgvi => "lgvi",
            Method::Elgvi => "elgvi",
            Method::Splt => "splt",
            Method::Rk4 => "rk4",
            Method::Rk45 => "rk45",
        }
    }

    /// Methods whose iterates stay on the group by construction.
    pub fn preserves_group(self) -> bool {
        matches!(self, Method::Lgvi | Method::Elgvi | Method::Splt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub objective: ObjectiveKind,
    /// Optional consistency check against the group implied by `objective`.
    pub group: Option<GroupName>,
    pub seed: u64,
    /// Wahba: geodesic distance of the initial attitude from the optimum.
    pub initial_angle: f64,
    /// Pose: feature file to load instead of generating a synthetic scene.
    pub features: Option<PathBuf>,
    pub n_features: usize,
    /// Synthetic intrinsics, row-major.
    pub intrinsics: [f64; 9],
    pub rotation_perturbation: f64,
    pub translation_perturbation: f64,
    /// Pose: explicit start, rotation row-major then translation (12 values).
    pub initial_pose: Option<Vec<f64>>,
    pub gradient: GradientMethod,
    /// Quadratic: row-major `n x n` matrix; identity when absent.
    pub hessian: Option<Vec<f64>>,
    /// Quadratic: minimizer; the origin when absent.
    pub center: Option<Vec<f64>>,
    pub initial_point: Option<Vec<f64>>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            objective: ObjectiveKind::Wahba,
            group: None,
            seed: 1,
            initial_angle: 0.9 * std::f64::consts::PI,
            features: None,
            n_features: 516,
            intrinsics: DEFAULT_INTRINSICS,
            rotation_perturbation: 0.3,
            translation_perturbation: 0.5,
            initial_pose: None,
            gradient: GradientMethod::FiniteDifference,
            hessian: None,
            center: None,
            initial_point: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub p: f64,
    pub c: f64,
    pub lambda: f64,
    /// Rotational block of `J`: 3 diagonal entries or 9 row-major. Identity when absent.
    pub metric: Option<Vec<f64>>,
    /// Translational block of `J`: n diagonal entries or n*n row-major.
    pub linear_metric: Option<Vec<f64>>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            p: 2.0,
            c: 1.0,
            lambda: 1.0,
            metric: None,
            linear_metric: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Initial step of the adaptive integrator, the step of the fixed-step ones.
    pub h0: f64,
    pub t0: f64,
    /// Initial momentum; zero when absent.
    pub mu0: Option<Vec<f64>>,
    pub momentum_rule: MomentumRule,
    pub energy_solve: EnergySolve,
    pub h_tolerance: f64,
    pub max_outer_iterations: usize,
    pub newton_tolerance: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Absolute and relative tolerance of RK45.
    pub rk_tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        IntegratorConfig {
            method: Method::Lgvi,
            h0: 0.1,
            t0: 0.1,
            mu0: None,
            momentum_rule: solver.momentum_rule,
            energy_solve: solver.energy_solve,
            h_tolerance: solver.h_tolerance,
            max_outer_iterations: solver.max_outer_iterations,
            newton_tolerance: solver.newton_tolerance,
            h_min: solver.h_min,
            h_max: solver.h_max,
            rk_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Stop after this many steps.
    pub steps: Option<usize>,
    /// Stop once `t >= t_final`.
    pub t_final: Option<f64>,
    /// Guard for `t_final` runs; exceeding it is a solver failure.
    pub max_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            steps: None,
            t_final: None,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    /// Record cumulative wall time; off keeps the CSV byte-reproducible.
    pub timing: bool,
    /// Write every `stride`-th row (the last row is always written).
    pub stride: usize,
    /// Name used in comparison reports; the method name when absent.
    pub label: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: None,
            timing: false,
            stride: 1,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub dynamics: DynamicsConfig,
    pub integrator: IntegratorConfig,
    pub run: RunConfig,
    pub output: OutputConfig,
}

const SECTIONS: [&str; 5] = ["problem", "dynamics", "integrator", "run", "output"];

fn parse_error(context: &str, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{context}: {e}"))
}

/// Splits `--key=value` (leading dashes optional) into its parts.
pub fn split_override(arg: &str) -> Result<(String, String)> {
    let body = arg.trim_start_matches('-');
    match body.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(Error::InvalidInput(format!(
            "override `{arg}` is not of the form --key=value"
        ))),
    }
}

fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn field_names() -> Vec<(&'static str, Vec<String>)> {
    let defaults = toml::Value::try_from(ExperimentConfig::default()).expect("serializable");
    // optional fields are skipped by the serializer, so list them by hand
    let optional: [(&str, &[&str]); 5] = [
        (
            "problem",
            &[
                "group",
                "features",
                "initial_pose",
                "hessian",
                "center",
                "initial_point",
            ],
        ),
        ("dynamics", &["metric", "linear_metric"]),
        ("integrator", &["mu0"]),
        ("run", &["steps", "t_final"]),
        ("output", &["path", "label"]),
    ];
    SECTIONS
        .iter()
        .map(|&sec| {
            let mut names: Vec<String> = defaults
                .get(sec)
                .and_then(|v| v.as_table())
                .map(|t| t.keys().cloned().collect())
                .unwrap_or_default();
            for (s, extra) in optional {
                if s == sec {
                    names.extend(extra.iter().map(|n| n.to_string()));
                }
            }
            (sec, names)
        })
        .collect()
}

/// Resolves an override key to `(section, field)`.
fn resolve_key(key: &str) -> Result<(String, String)> {
    let fields = field_names();
    if let Some((sec, field)) = key.split_once('.') {
        let known = fields
            .iter()
            .any(|(s, names)| *s == sec && names.iter().any(|n| n == field));
        if !known {
            return Err(Error::InvalidInput(format!("unknown config key `{key}`")));
        }
        return Ok((sec.to_string(), field.to_string()));
    }
    let hits: Vec<&str> = fields
        .iter()
        .filter(|(_, names)| names.iter().any(|n| n == key))
        .map(|(s, _)| *s)
        .collect();
    match hits.as_slice() {
        [sec] => Ok((sec.to_string(), key.to_string())),
        [] => Err(Error::InvalidInput(format!("unknown config key `{key}`"))),
        _ => Err(Error::InvalidInput(format!(
            "config key `{key}` is ambiguous; qualify it with a section ({})",
            hits.join(", ")
        ))),
    }
}

impl ExperimentConfig {
    /// Parses TOML text and applies overrides.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error("config", e))?;
        for (key, raw) in overrides {
            let (sec, field) = resolve_key(key)?;
            let section = table
                .entry(sec.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            match section {
                toml::Value::Table(t) => {
                    t.insert(field, override_value(raw));
                }
                _ => return Err(Error::Parse(format!("config: `{sec}` must be a table"))),
            }
        }
        let config: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| parse_error("config", e))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file (or starts from the defaults when `path` is `None`).
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| parse_error("config", e))
    }

    pub fn label(&self) -> String {
        self.output
            .label
            .clone()
            .unwrap_or_else(|| self.integrator.method.name().to_string())
    }

    /// Group of the optimization variable, with its dimension.
    pub fn group_kind(&self) -> Result<GroupKind> {
        Ok(match self.problem.objective {
            ObjectiveKind::Wahba => GroupKind::So3,
            ObjectiveKind::Pose => GroupKind::Product(3),
            ObjectiveKind::Quadratic => {
                let n = self
                    .problem
                    .initial_point
                    .as_ref()
                    .or(self.problem.center.as_ref())
                    .map(Vec::len)
                    .ok_or_else(|| {
                        Error::InvalidInput("quadratic objective needs `initial_point`".into())
                    })?;
                GroupKind::Rn(n)
            }
        })
    }

    pub fn metric(&self) -> Result<MetricOperator> {
        let kind = self.group_kind()?;
        let rotation = match &self.dynamics.metric {
            None => Matrix3::identity(),
            Some(v) if v.len() == 3 => {
                Matrix3::from_diagonal(&nalgebra::Vector3::new(v[0], v[1], v[2]))
            }
            Some(v) if v.len() == 9 => Matrix3::from_row_slice(v),
            Some(v) => {
                return Err(Error::InvalidInput(format!(
                    "`metric` needs 3 or 9 values, got {}",
                    v.len()
                )))
            }
        };
        let n = kind.linear_dim();
        let linear = match &self.dynamics.linear_metric {
            None => DMatrix::identity(n, n),
            Some(v) if v.len() == n => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
            }
            Some(v) if v.len() == n * n => DMatrix::from_row_slice(n, n, v),
            Some(v) => {
                return Err(Error::InvalidInput(format!(
                    "`linear_metric` needs {n} or {} values, got {}",
                    n * n,
                    v.len()
                )))
            }
        };
        MetricOperator::new(kind, rotation, linear)
    }

    pub fn params(&self) -> Result<BregmanParams> {
        let d = &self.dynamics;
        BregmanParams::new(d.p, d.c, d.lambda, self.metric()?)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let i = &self.integrator;
        SolverOptions {
            h_tolerance: i.h_tolerance,
            max_outer_iterations: i.max_outer_iterations,
            newton_tolerance: i.newton_tolerance,
            h_min: i.h_min,
            h_max: i.h_max,
            momentum_rule: i.momentum_rule,
            energy_solve: i.energy_solve,
        }
    }

    pub fn rk45_options(&self) -> Rk45Options {
        Rk45Options {
            atol: self.integrator.rk_tolerance,
            rtol: self.integrator.rk_tolerance,
            h_initial: None,
            max_steps: self.run.max_steps,
        }
    }

    /// Checks everything that can be checked without building the problem.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let kind = self.group_kind()?;
        if let Some(g) = self.problem.group {
            if g != self.problem.objective.group_name() {
                return bad(format!(
                    "objective {:?} lives on {:?}, config says {g:?}",
                    self.problem.objective,
                    self.problem.objective.group_name()
                ));
            }
        }
        let params = self.params()?;
        let i = &self.integrator;
        if !(i.h0 > 0.0) || !(i.t0 > 0.0) {
            return bad(format!("need h0 > 0 and t0 > 0 (got {}, {})", i.h0, i.t0));
        }
        if let Some(mu) = &i.mu0 {
            if mu.len() != kind.algebra_dim() {
                return bad(format!(
                    "mu0 has {} entries, the algebra has dimension {}",
                    mu.len(),
                    kind.algebra_dim()
                ));
            }
        }
        if !i.method.preserves_group() || i.method == Method::Splt {
            // splitting and Runge-Kutta are set up for SO(3) with J = I only
            if kind != GroupKind::So3 || params.metric.scalar_rotation() != Some(1.0) {
                return bad(format!(
                    "{} requires an SO(3) objective with J = I",
                    i.method.name()
                ));
            }
        }
        if i.method == Method::Rk45 && !(i.rk_tolerance > 0.0) {
            return bad("rk_tolerance must be positive".into());
        }
        self.solver_options().validate()?;
        if i.method == Method::Lgvi && !(i.h_min..=i.h_max).contains(&i.h0) {
            return bad(format!(
                "h0 {} outside the step bounds [{}, {}]",
                i.h0, i.h_min, i.h_max
            ));
        }
        let r = &self.run;
        if r.steps.is_none() && r.t_final.is_none() {
            return bad("run length missing: set `run.steps` or `run.t_final`".into());
        }
        if let Some(tf) = r.t_final {
            if !(tf > i.t0) {
                return bad(format!("t_final {tf} must exceed t0 {}", i.t0));
            }
        }
        if self.output.stride == 0 {
            return bad("output stride must be positive".into());
        }
        let p = &self.problem;
        match p.objective {
            ObjectiveKind::Wahba => {
                if !(0.0..std::f64::consts::PI).contains(&p.initial_angle) {
                    return bad(format!("initial_angle {} outside [0, pi)", p.initial_angle));
                }
            }
            ObjectiveKind::Pose => {
                if let Some(v) = &p.initial_pose {
                    if v.len() != 12 {
                        return bad(format!("initial_pose needs 12 values, got {}", v.len()));
                    }
                }
            }
            ObjectiveKind::Quadratic => {
                let n = kind.linear_dim();
                if p.initial_point.as_ref().map(Vec::len) != Some(n) {
                    return bad("quadratic objective needs `initial_point`".into());
                }
                if let Some(c) = &p.center {
                    if c.len() != n {
                        return bad(format!("center has {} entries, expected {n}", c.len()));
                    }
                }
                if let Some(h) = &p.hessian {
                    if h.len() != n * n {
                        return bad(format!("hessian needs {} values, got {}", n * n, h.len()));
                    }
                }
            }
        }
        Ok(())
    }
}
