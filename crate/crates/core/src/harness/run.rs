//! Single seeded runs and the trajectory CSV.
//!
//! Random draws come from one ChaCha8 stream seeded with `problem.seed`, in this order:
//!
//! * Wahba: the nine entries of `A` (row by row), then the initial rotation axis.
//! * Pose, synthetic scene: ground-truth pose (axis, angle, translation), the scene
//!   features, then the initial perturbation (rotation axis, translation direction).
//! * Pose from a feature file: only the perturbation, unless `initial_pose` is given.
//! * Quadratic: nothing.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bregman::{bregman_energy, BregmanParams, ContinuousState};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method, ObjectiveKind};
use crate::harness::features::ingest_features;
use crate::integrators::{
    elgvi_step_with, embed, rk4_step, so3_embedded_rhs, splt_step, unembed, Lgvi, Rk45Stepper,
};
use crate::lie::{exp_so3, orthogonality_error, AlgebraVector, GroupPoint};
use crate::objectives::{
    initial_rotation, perturb_pose, random_wahba_matrix, synth_scene, CameraScene, Objective, Pose,
    Quadratic, ReprojectionObjective, WahbaProblem,
};

/// Exact CSV header of a trajectory file.
pub const CSV_HEADER: &str = "k,t,h,f,f_gap,E,ortho_err,solver_iters,wall_s";

/// One logged step.
///
/// `h` is the step that produced the row (`h_0` on row 0). `energy` is the carried discrete
/// energy for LGVI and the continuous Bregman energy for the other methods. `solver_iters`
/// counts energy-residual evaluations (LGVI), Newton iterations (ELGVI) or right-hand side
/// evaluations (Runge-Kutta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub t: f64,
    pub h: f64,
    pub f: f64,
    /// `f - f*`, NaN when the optimum is unknown.
    pub f_gap: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub ortho_err: f64,
    pub solver_iters: usize,
    pub wall_s: f64,
}

/// Largest rotation angle drawn for a synthetic ground-truth pose.
pub const SYNTH_MAX_ANGLE: f64 = 0.5;
/// Synthetic ground-truth translations are uniform in `[-SYNTH_MAX_OFFSET, SYNTH_MAX_OFFSET]^3`.
pub const SYNTH_MAX_OFFSET: f64 = 1.0;

/// Objective plus initial condition built from a config.
pub struct Problem {
    pub objective: Box<dyn Objective>,
    pub params: BregmanParams,
    pub g0: GroupPoint,
    pub mu0: AlgebraVector,
    /// `f*` when known.
    pub optimum: Option<f64>,
    /// Pose problems keep their scene for reporting.
    pub scene: Option<CameraScene>,
}

/// Random ground-truth pose used for synthetic scenes.
pub fn random_pose<R: Rng + ?Sized>(rng: &mut R) -> Pose {
    let axis = crate::objectives::random_axis(rng);
    let angle = rng.random_range(0.0..SYNTH_MAX_ANGLE);
    let x = Vector3::from_fn(|_, _| rng.random_range(-SYNTH_MAX_OFFSET..=SYNTH_MAX_OFFSET));
    Pose::new(exp_so3(&(axis * angle)), x)
}

/// Synthetic scene drawn exactly as a pose run draws it.
pub fn synthetic_scene(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<CameraScene> {
    let p = &config.problem;
    let truth = random_pose(rng);
    let k = Matrix3::from_row_slice(&p.intrinsics);
    synth_scene(p.n_features, &truth, &k, rng)
}

/// The synthetic scene of a pose run with this config's seed.
pub fn seeded_synthetic_scene(config: &ExperimentConfig) -> Result<CameraScene> {
    synthetic_scene(config, &mut ChaCha8Rng::seed_from_u64(config.problem.seed))
}

impl Problem {
    pub fn from_config(config: &ExperimentConfig) -> Result<Problem> {
        config.validate()?;
        let params = config.params()?;
        let kind = config.group_kind()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.problem.seed);
        let p = &config.problem;
        let (objective, g0, scene): (Box<dyn Objective>, GroupPoint, Option<CameraScene>) =
            match p.objective {
                ObjectiveKind::Wahba => {
                    let w = WahbaProblem::new(random_wahba_matrix(&mut rng));
                    let (r_star, _) = w.optimum()?;
                    let r0 = initial_rotation(&r_star, p.initial_angle, &mut rng)?;
                    (Box::new(w), GroupPoint::So3(r0), None)
                }
                ObjectiveKind::Pose => {
                    let scene = match &p.features {
                        Some(path) => ingest_features(path)?,
                        None => synthetic_scene(config, &mut rng)?,
                    };
                    scene.validate()?;
                    let start = match &p.initial_pose {
                        Some(v) => Pose::new(
                            Matrix3::from_row_slice(&v[..9]),
                            Vector3::new(v[9], v[10], v[11]),
                        ),
                        None => {
                            let truth = scene.ground_truth.as_ref().ok_or_else(|| {
                                Error::InvalidInput(
                                    "feature file has no ground truth; set `initial_pose`".into(),
                                )
                            })?;
                            perturb_pose(
                                truth,
                                p.rotation_perturbation,
                                p.translation_perturbation,
                                &mut rng,
                            )
                        }
                    };
                    let g0 = GroupPoint::product(
                        start.rotation,
                        DVector::from_column_slice(start.translation.as_slice()),
                    )?;
                    let objective = ReprojectionObjective::new(scene.clone(), p.gradient);
                    (Box::new(objective), g0, Some(scene))
                }
                ObjectiveKind::Quadratic => {
                    let n = kind.linear_dim();
                    let hessian = match &p.hessian {
                        Some(h) => DMatrix::from_row_slice(n, n, h),
                        None => DMatrix::identity(n, n),
                    };
                    let center = p
                        .center
                        .as_ref()
                        .map(|c| DVector::from_row_slice(c))
                        .unwrap_or_else(|| DVector::zeros(n));
                    let x0 = DVector::from_row_slice(p.initial_point.as_deref().unwrap_or(&[]));
                    (
                        Box::new(Quadratic::new(hessian, center)),
                        GroupPoint::rn(x0),
                        None,
                    )
                }
            };
        let mu0 = match &config.integrator.mu0 {
            Some(v) => AlgebraVector::from_slice(v),
            None => AlgebraVector::zeros(kind.algebra_dim()),
        };
        Ok(Problem {
            optimum: objective.optimum_value(),
            objective,
            params,
            g0,
            mu0,
            scene,
        })
    }
}

/// Records of a run, and the failure that ended it early, if any.
#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub failure: Option<Error>,
    pub final_point: GroupPoint,
    pub optimum: Option<f64>,
}

impl RunOutcome {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    /// Mean of the steps taken (rows 1 onwards).
    pub fn mean_step(&self) -> f64 {
        let steps = &self.records[1.min(self.records.len())..];
        if steps.is_empty() {
            return f64::NAN;
        }
        steps.iter().map(|r| r.h).sum::<f64>() / steps.len() as f64
    }

    pub fn last(&self) -> &TrajectoryRecord {
        self.records
            .last()
            .expect("a run has at least its initial row")
    }

    /// CSV text with the given row stride; a failed run ends with an all-NaN failure row.
    pub fn to_csv(&self, stride: usize) -> String {
        let mut out = String::with_capacity(self.records.len() / stride.max(1) * 160 + 64);
        out.push_str(CSV_HEADER);
        out.push('\n');
        let n = self.records.len();
        for (i, r) in self.records.iter().enumerate() {
            if i % stride.max(1) == 0 || i + 1 == n {
                write_row(&mut out, r);
            }
        }
        if self.failure.is_some() {
            let k = self.records.last().map_or(0, |r| r.k + 1);
            let _ = writeln!(out, "{k},NaN,NaN,NaN,NaN,NaN,NaN,0,NaN");
        }
        out
    }

    pub fn write_csv(&self, path: &Path, stride: usize) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_csv(stride).as_bytes())?;
        file.flush()?;
        Ok(())
    }
}

fn write_row(out: &mut String, r: &TrajectoryRecord) {
    let _ = writeln!(
        out,
        "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
        r.k, r.t, r.h, r.f, r.f_gap, r.energy, r.ortho_err, r.solver_iters, r.wall_s
    );
}

/// Reads a trajectory CSV, skipping a trailing failure row.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Parse(format!(
            "{}: header `{header}` is not `{CSV_HEADER}`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<TrajectoryRecord>().enumerate() {
        let rec =
            rec.map_err(|e| Error::Parse(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if rec.t.is_nan() {
            continue;
        }
        rows.push(rec);
    }
    Ok(rows)
}

fn gap(f: f64, optimum: Option<f64>) -> f64 {
    optimum.map_or(f64::NAN, |s| f - s)
}

/// Continuous energy with velocity `J^-1 mu / phi(t)`.
fn momentum_energy(
    t: f64,
    g: &GroupPoint,
    mu: &AlgebraVector,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<f64> {
    let xi = params.metric.apply_inverse(mu).scale(1.0 / params.phi(t)?);
    bregman_energy(
        &ContinuousState {
            t,
            g: g.clone(),
            xi,
        },
        params,
        objective,
    )
}

struct Logger {
    start: Instant,
    timing: bool,
    optimum: Option<f64>,
    records: Vec<TrajectoryRecord>,
}

impl Logger {
    fn push(&mut self, t: f64, h: f64, f: f64, energy: f64, ortho_err: f64, iters: usize) {
        let wall_s = if self.timing {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        self.records.push(TrajectoryRecord {
            k: self.records.len(),
            t,
            h,
            f,
            f_gap: gap(f, self.optimum),
            energy,
            ortho_err,
            solver_iters: iters,
            wall_s,
        });
    }
}

/// Stopping rule shared by all methods.
struct Stop {
    steps: Option<usize>,
    t_final: Option<f64>,
    max_steps: usize,
}

impl Stop {
    fn done(&self, k: usize, t: f64) -> bool {
        self.steps.is_some_and(|n| k >= n) || self.t_final.is_some_and(|tf| t >= tf)
    }

    fn guard(&self, k: usize, t: f64) -> Result<()> {
        if k >= self.max_steps {
            return Err(Error::StepFailure {
                t,
                residual: f64::NAN,
                reason: format!("step budget of {} exhausted", self.max_steps),
            });
        }
        Ok(())
    }
}

/// Runs the configured experiment and writes the CSV when `output.path` is set.
///
/// Setup errors are returned as `Err`; a solver failure mid-run yields the partial
/// trajectory with `failure` set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let problem = Problem::from_config(config)?;
    let outcome = run_problem(config, &problem)?;
    if let Some(path) = &config.output.path {
        outcome.write_csv(path, config.output.stride)?;
    }
    Ok(outcome)
}

/// Runs an already built problem; never writes files.
pub fn run_problem(config: &ExperimentConfig, problem: &Problem) -> Result<RunOutcome> {
    let mut log = Logger {
        start: Instant::now(),
        timing: config.output.timing,
        optimum: problem.optimum,
        records: Vec::new(),
    };
    let stop = Stop {
        steps: config.run.steps,
        t_final: config.run.t_final,
        max_steps: config.run.max_steps,
    };
    let (final_point, failure) = match config.integrator.method {
        Method::Lgvi => run_lgvi(config, problem, &stop, &mut log)?,
        Method::Elgvi => run_elgvi(config, problem, &stop, &mut log)?,
        Method::Splt => run_splt(config, problem, &stop, &mut log)?,
        Method::Rk4 | Method::Rk45 => run_runge_kutta(config, problem, &stop, &mut log)?,
    };
    Ok(RunOutcome {
        records: log.records,
        failure,
        final_point,
        optimum: problem.optimum,
    })
}

type Ended = (GroupPoint, Option<Error>);

/// Splits a step error into "stop the run" (solver failure) and "abort" (anything else).
fn classify(e: Error) -> Result<Error> {
    if e.is_solver_failure() || matches!(e, Error::BehindCamera { .. }) {
        Ok(e)
    } else {
        Err(e)
    }
}

fn run_lgvi(
    config: &ExperimentConfig,
    pb: &Problem,
    stop: &Stop,
    log: &mut Logger,
) -> Result<Ended> {
    let obj = pb.objective.as_ref();
    let lgvi = Lgvi::new(&pb.params, obj, config.solver_options())?;
    let h0 = config.integrator.h0;
    let mut state = match lgvi.init(config.integrator.t0, pb.g0.clone(), pb.mu0.clone(), h0) {
        Ok(s) => s,
        Err(e) => return Ok((pb.g0.clone(), Some(classify(e)?))),
    };
    let mut f = obj.value(&state.g)?;
    let mut grad = obj.gradient(&state.g)?;
    log.push(
        state.t,
        h0,
        f,
        state.energy,
        state.g.orthogonality_error(),
        0,
    );
    let mut h = h0;
    let mut k = 0;
    while !stop.done(k, state.t) {
        if let Err(e) = stop.guard(k, state.t) {
            return Ok((state.g, Some(e)));
        }
        let out = match lgvi.step_with(&state, h, f, &grad) {
            Ok(out) => out,
            Err(e) => return Ok((state.g, Some(classify(e)?))),
        };
        h = out.record.h;
        state = out.state;
        f = out.f_next;
        grad = out.grad_next;
        k += 1;
        log.push(
            state.t,
            h,
            f,
            state.energy,
            state.g.orthogonality_error(),
            out.record.outer_iterations,
        );
    }
    Ok((state.g, None))
}

fn run_elgvi(
    config: &ExperimentConfig,
    pb: &Problem,
    stop: &Stop,
    log: &mut Logger,
) -> Result<Ended> {
    let obj = pb.objective.as_ref();
    let h = config.integrator.h0;
    let rule = config.integrator.momentum_rule;
    let (mut t, mut g, mut mu) = (config.integrator.t0, pb.g0.clone(), pb.mu0.clone());
    let mut grad = obj.gradient(&g)?;
    let f = obj.value(&g)?;
    log.push(
        t,
        h,
        f,
        momentum_energy(t, &g, &mu, &pb.params, obj)?,
        g.orthogonality_error(),
        0,
    );
    let mut k = 0;
    while !stop.done(k, t) {
        if let Err(e) = stop.guard(k, t) {
            return Ok((g, Some(e)));
        }
        let step = match elgvi_step_with(t, &g, &mu, &grad, h, &pb.params, obj, rule) {
            Ok(s) => s,
            Err(e) => return Ok((g, Some(classify(e)?))),
        };
        (g, mu, grad) = (step.g, step.mu, step.grad);
        t += h;
        k += 1;
        let f = obj.value(&g)?;
        let energy = momentum_energy(t, &g, &mu, &pb.params, obj)?;
        log.push(
            t,
            h,
            f,
            energy,
            g.orthogonality_error(),
            step.newton_iterations,
        );
    }
    Ok((g, None))
}

fn initial_velocity(config: &ExperimentConfig, pb: &Problem) -> Result<Vector3<f64>> {
    let phi = pb.params.phi(config.integrator.t0)?;
    Ok(pb.params.metric.apply_inverse(&pb.mu0).head3() / phi)
}

fn so3_energy(t: f64, omega: &Vector3<f64>, f: f64, params: &BregmanParams) -> Result<f64> {
    Ok(0.5 * params.phi(t)? * omega.norm_squared() + params.theta(t)? * f)
}

fn rotation_of(g: &GroupPoint) -> Result<Matrix3<f64>> {
    g.rotation()
        .copied()
        .ok_or_else(|| Error::Unsupported("method needs an SO(3) problem".into()))
}

fn run_splt(
    config: &ExperimentConfig,
    pb: &Problem,
    stop: &Stop,
    log: &mut Logger,
) -> Result<Ended> {
    let obj = pb.objective.as_ref();
    let h = config.integrator.h0;
    let mut t = config.integrator.t0;
    let mut r = rotation_of(&pb.g0)?;
    let mut omega = initial_velocity(config, pb)?;
    let f = obj.value(&GroupPoint::So3(r))?;
    log.push(
        t,
        h,
        f,
        so3_energy(t, &omega, f, &pb.params)?,
        orthogonality_error(&r),
        0,
    );
    let mut k = 0;
    while !stop.done(k, t) {
        if let Err(e) = stop.guard(k, t) {
            return Ok((GroupPoint::So3(r), Some(e)));
        }
        (r, omega) = match splt_step(t, &r, &omega, h, &pb.params, obj) {
            Ok(s) => s,
            Err(e) => return Ok((GroupPoint::So3(r), Some(classify(e)?))),
        };
        t += h;
        k += 1;
        let f = obj.value(&GroupPoint::So3(r))?;
        log.push(
            t,
            h,
            f,
            so3_energy(t, &omega, f, &pb.params)?,
            orthogonality_error(&r),
            1,
        );
    }
    Ok((GroupPoint::So3(r), None))
}

fn run_runge_kutta(
    config: &ExperimentConfig,
    pb: &Problem,
    stop: &Stop,
    log: &mut Logger,
) -> Result<Ended> {
    let obj = pb.objective.as_ref();
    let params = &pb.params;
    let mut rhs =
        |t: f64, y: &crate::integrators::EmbeddedState| so3_embedded_rhs(t, y, params, obj);
    // the embedded matrix drifts off SO(3); it is evaluated as is
    let record = |log: &mut Logger,
                  t: f64,
                  h: f64,
                  y: &crate::integrators::EmbeddedState,
                  iters|
     -> Result<()> {
        let (r, omega) = unembed(y);
        let f = obj.value(&GroupPoint::So3(r))?;
        log.push(
            t,
            h,
            f,
            so3_energy(t, &omega, f, params)?,
            orthogonality_error(&r),
            iters,
        );
        Ok(())
    };
    let t0 = config.integrator.t0;
    let y0 = embed(&rotation_of(&pb.g0)?, &initial_velocity(config, pb)?);
    let point = |y: &crate::integrators::EmbeddedState| GroupPoint::So3(unembed(y).0);
    if config.integrator.method == Method::Rk4 {
        let h = config.integrator.h0;
        let (mut t, mut y) = (t0, y0);
        record(log, t, h, &y, 0)?;
        let mut k = 0;
        while !stop.done(k, t) {
            if let Err(e) = stop.guard(k, t) {
                return Ok((point(&y), Some(e)));
            }
            y = match rk4_step(&mut rhs, t, &y, h) {
                Ok(y) => y,
                Err(e) => return Ok((point(&y), Some(classify(e)?))),
            };
            t += h;
            k += 1;
            record(log, t, h, &y, 4)?;
        }
        return Ok((point(&y), None));
    }
    let mut opts = config.rk45_options();
    opts.max_steps = usize::MAX;
    let mut stepper = match Rk45Stepper::new(&mut rhs, t0, y0, &opts) {
        Ok(s) => s,
        Err(e) => return Ok((point(&y0), Some(classify(e)?))),
    };
    record(log, t0, stepper.h, &y0, stepper.evaluations)?;
    let t_end = config.run.t_final.unwrap_or(f64::INFINITY);
    let mut k = 0;
    while !stop.done(k, stepper.t) {
        if let Err(e) = stop.guard(k, stepper.t) {
            return Ok((point(&stepper.y), Some(e)));
        }
        let (t_prev, evals) = (stepper.t, stepper.evaluations);
        if let Err(e) = stepper.advance(&mut rhs, t_end) {
            return Ok((point(&stepper.y), Some(classify(e)?)));
        }
        k += 1;
        record(
            log,
            stepper.t,
            stepper.t - t_prev,
            &stepper.y,
            stepper.evaluations - evals,
        )?;
    }
    Ok((point(&stepper.y), None))
}
