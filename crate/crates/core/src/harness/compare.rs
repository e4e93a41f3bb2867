//! Side-by-side runs of several integrators on one problem.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method};
use crate::harness::run::{run_problem, Problem, RunOutcome, TrajectoryRecord};

/// Per-method totals of a comparison.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub label: String,
    pub method: Method,
    pub steps: usize,
    pub final_t: f64,
    pub final_gap: f64,
    pub max_ortho_err: f64,
    /// Wall time of one run, averaged over the repetitions.
    pub mean_wall_s: f64,
    /// Message of the failure that ended the run early.
    pub failure: Option<String>,
}

#[derive(Debug)]
pub struct ComparisonReport {
    pub summaries: Vec<MethodSummary>,
    /// Common time grid of the aligned table.
    pub grid: Vec<f64>,
    /// `aligned[m][i]` is method `m`'s last record at or before `grid[i]`.
    pub aligned: Vec<Vec<TrajectoryRecord>>,
    pub outcomes: Vec<RunOutcome>,
}

/// Runs every config `repetitions` times (at least once) and aligns the first run of each
/// on `samples` log-spaced times inside the span all runs reached.
///
/// All configs must describe the same problem (objective, seed and scene settings).
pub fn compare_integrators(
    configs: &[ExperimentConfig],
    repetitions: usize,
    samples: usize,
) -> Result<ComparisonReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::InvalidInput("comparison needs at least one config".into()))?;
    let reference = toml::Value::try_from(&first.problem)
        .map_err(|e| Error::Parse(format!("problem section: {e}")))?;
    for c in &configs[1..] {
        let other = toml::Value::try_from(&c.problem)
            .map_err(|e| Error::Parse(format!("problem section: {e}")))?;
        if other != reference {
            return Err(Error::InvalidInput(format!(
                "`{}` and `{}` do not share the same problem",
                first.label(),
                c.label()
            )));
        }
    }
    if samples < 2 {
        return Err(Error::InvalidInput("at least 2 samples are needed".into()));
    }

    let mut summaries = Vec::new();
    let mut outcomes = Vec::new();
    for config in configs {
        let problem = Problem::from_config(config)?;
        let mut outcome = None;
        let mut wall = 0.0;
        for _ in 0..repetitions.max(1) {
            let start = Instant::now();
            let o = run_problem(config, &problem)?;
            wall += start.elapsed().as_secs_f64();
            outcome.get_or_insert(o);
        }
        let outcome = outcome.expect("at least one repetition");
        let last = outcome.last();
        summaries.push(MethodSummary {
            label: config.label(),
            method: config.integrator.method,
            steps: last.k,
            final_t: last.t,
            final_gap: last.f_gap,
            max_ortho_err: outcome
                .records
                .iter()
                .map(|r| r.ortho_err)
                .fold(0.0, f64::max),
            mean_wall_s: wall / repetitions.max(1) as f64,
            failure: outcome.failure.as_ref().map(|e| e.to_string()),
        });
        outcomes.push(outcome);
    }

    let t_start = outcomes
        .iter()
        .map(|o| o.records[0].t)
        .fold(f64::NEG_INFINITY, f64::max);
    let t_end = outcomes
        .iter()
        .map(|o| o.last().t)
        .fold(f64::INFINITY, f64::min);
    let grid: Vec<f64> = if t_end > t_start {
        (0..samples)
            .map(|i| t_start * (t_end / t_start).powf(i as f64 / (samples - 1) as f64))
            .collect()
    } else {
        vec![t_start]
    };
    let aligned = outcomes
        .iter()
        .map(|o| grid.iter().map(|&t| *hold(&o.records, t)).collect())
        .collect();
    Ok(ComparisonReport {
        summaries,
        grid,
        aligned,
        outcomes,
    })
}

/// Zero-order hold: last record with `t <= at` (the first record if none).
fn hold(records: &[TrajectoryRecord], at: f64) -> &TrajectoryRecord {
    let i = records.partition_point(|r| r.t <= at * (1.0 + 1e-12));
    &records[i.saturating_sub(1)]
}

impl ComparisonReport {
    /// Aligned table: `t` then `<label>_f_gap,<label>_ortho_err` per method.
    pub fn aligned_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.summaries {
            let _ = write!(out, ",{0}_f_gap,{0}_ortho_err", s.label);
        }
        out.push('\n');
        for (i, t) in self.grid.iter().enumerate() {
            let _ = write!(out, "{t:.16e}");
            for rows in &self.aligned {
                let _ = write!(out, ",{:.16e},{:.16e}", rows[i].f_gap, rows[i].ortho_err);
            }
            out.push('\n');
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out =
            String::from("label,method,steps,final_t,final_gap,max_ortho_err,mean_wall_s,status\n");
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.6e},{}",
                s.label,
                s.method.name(),
                s.steps,
                s.final_t,
                s.final_gap,
                s.max_ortho_err,
                s.mean_wall_s,
                if s.failure.is_some() { "failed" } else { "ok" }
            );
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>10} {:>10} {:>12} {:>12} {:>10}  status\n",
            "method", "steps", "final t", "f - f*", "max ortho", "wall s"
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<12} {:>10} {:>10.4} {:>12.4e} {:>12.4e} {:>10.4}  {}",
                s.label,
                s.steps,
                s.final_t,
                s.final_gap,
                s.max_ortho_err,
                s.mean_wall_s,
                s.failure.as_deref().unwrap_or("ok")
            );
        }
        out
    }

    pub fn write(&self, aligned_path: &Path, summary_path: &Path) -> Result<()> {
        std::fs::write(aligned_path, self.aligned_csv())?;
        std::fs::write(summary_path, self.summary_csv())?;
        Ok(())
    }
}
