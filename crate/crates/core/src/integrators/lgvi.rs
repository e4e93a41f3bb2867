//! Adaptive extended Lie group variational integrator.
//!
//! One step maps `(t_k, E_k, g_k, mu_k)` to `(t_{k+1}, E_{k+1}, g_{k+1}, mu_{k+1})`. For a
//! trial step `h` the momentum equation gives the relative update `f_k`; the step is then
//! chosen so that the discrete energy `E^-_k(h)` matches the carried energy `E_k`.
//!
//! The scalar equation `r(h) = E^-_k(h) - E_k = 0` is solved by bracketing around the
//! previous step and Brent's method, by default stopping at the first trial step with
//! `|r| <= h_tolerance` (the previous step itself is tried first). Steps for which the momentum
//! equation has no solution count as `r = +inf`. When no sign change exists near the
//! previous step the least-squares minimizer of `|r|` is accepted if it meets the
//! tolerance, and the step is flagged as a fallback.

use crate::bregman::BregmanParams;
use crate::error::{Error, Result};
use crate::integrators::dd::Dd;
use crate::integrators::discrete::{
    discrete_kinetic, momentum_update, relative_update, rotation_method, shifted_momentum,
    StepSchedule,
};
use crate::integrators::rotation::RotationMethod;
use crate::integrators::{EnergySolve, SolverOptions};
use crate::lie::{AlgebraVector, GroupPoint};
use crate::objectives::Objective;

/// Point `(t, E, g, mu)` of the extended discrete phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub t: f64,
    pub energy: f64,
    /// Low-order part of the energy: the carried value is `energy + energy_lo`.
    pub energy_lo: f64,
    pub g: GroupPoint,
    pub mu: AlgebraVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub h: f64,
    /// Energy-residual evaluations spent on this step.
    pub outer_iterations: usize,
    /// Newton iterations of the accepted relative-rotation solve.
    pub newton_iterations: usize,
    /// `|E^-_k(h) - E_k|` at the accepted step.
    pub residual: f64,
    /// Accepted as a least-squares minimizer rather than a bracketed root.
    pub fallback: bool,
}

/// Everything produced by one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: ExtendedState,
    pub record: StepRecord,
    /// Relative update `f_k = g_k^-1 g_{k+1}`.
    pub relative: GroupPoint,
    pub f_next: f64,
    pub grad_next: AlgebraVector,
}

/// Evaluation of the step equations at a fixed `h`.
#[derive(Debug, Clone)]
pub struct Trial {
    pub schedule: StepSchedule,
    pub shifted: AlgebraVector,
    pub relative: GroupPoint,
    pub newton_iterations: usize,
    pub kinetic: f64,
    pub f_next: f64,
    pub energy_minus: f64,
    /// Low-order part of `energy_minus`.
    pub energy_minus_lo: f64,
}

/// Step growth factor while searching for a sign change.
const GROWTH: f64 = 1.25;
/// How far from the previous step the local search goes (as a ratio).
const LOCAL_SPAN: f64 = 4.0;
/// Relative share of `h_tolerance` kept free for rounding in the residual.
const ACCEPT_MARGIN: f64 = 1e-6;
/// Golden-section iterations of the least-squares fallback.
const GOLDEN_ITERATIONS: usize = 30;

fn infeasible(e: &Error) -> bool {
    e.is_solver_failure() || matches!(e, Error::BehindCamera { .. })
}

/// Adaptive stepper bound to one problem.
pub struct Lgvi<'a> {
    params: &'a BregmanParams,
    objective: &'a dyn Objective,
    options: SolverOptions,
    method: RotationMethod,
}

impl<'a> Lgvi<'a> {
    pub fn new(
        params: &'a BregmanParams,
        objective: &'a dyn Objective,
        options: SolverOptions,
    ) -> Result<Self> {
        options.validate()?;
        if objective.kind() != params.kind() {
            return Err(Error::InvalidInput(format!(
                "objective lives on {:?} but the metric on {:?}",
                objective.kind(),
                params.kind()
            )));
        }
        Ok(Lgvi {
            params,
            objective,
            options,
            method: rotation_method(params, &options),
        })
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn params(&self) -> &BregmanParams {
        self.params
    }

    /// Solves the momentum equation at step `h` and evaluates `E^-_k(h)`.
    ///
    /// `h` is first rounded to `fl(t + h) - t`, so that `t_{k+1} = t_k + h` holds exactly.
    pub fn trial(
        &self,
        t: f64,
        g: &GroupPoint,
        mu: &AlgebraVector,
        f_k: f64,
        grad_k: &AlgebraVector,
        h: f64,
    ) -> Result<Trial> {
        let schedule = StepSchedule::new(self.params, t, (t + h) - t)?;
        let shifted = shifted_momentum(mu, grad_k, &schedule);
        let (relative, newton_iterations) =
            relative_update(&shifted, &schedule, self.params, self.method)?;
        let kinetic = discrete_kinetic(&relative, &self.params.metric);
        let f_next = self.objective.value(&g.compose(&relative)?)?;
        let energy_minus = schedule.energy_minus_dd(kinetic, f_k, f_next);
        Ok(Trial {
            schedule,
            shifted,
            relative,
            newton_iterations,
            kinetic,
            f_next,
            energy_minus: energy_minus.hi,
            energy_minus_lo: energy_minus.lo,
        })
    }

    /// Initial extended state: `E_0 = E^-_0(h_0)`.
    pub fn init(
        &self,
        t0: f64,
        g0: GroupPoint,
        mu0: AlgebraVector,
        h0: f64,
    ) -> Result<ExtendedState> {
        if !(t0 > 0.0) || !(h0 > 0.0) {
            return Err(Error::Domain(format!(
                "initialization needs t_0 > 0 and h_0 > 0 (got {t0}, {h0})"
            )));
        }
        check_shapes(self.params, &g0, &mu0)?;
        let f0 = self.objective.value(&g0)?;
        let grad0 = self.objective.gradient(&g0)?;
        let trial = self.trial(t0, &g0, &mu0, f0, &grad0, h0)?;
        Ok(ExtendedState {
            t: t0,
            energy: trial.energy_minus,
            energy_lo: trial.energy_minus_lo,
            g: g0,
            mu: mu0,
        })
    }

    pub fn step(&self, state: &ExtendedState, h_guess: f64) -> Result<StepOutput> {
        let f_k = self.objective.value(&state.g)?;
        let grad_k = self.objective.gradient(&state.g)?;
        self.step_with(state, h_guess, f_k, &grad_k)
    }

    /// Step with `f(g_k)` and its gradient already known.
    pub fn step_with(
        &self,
        state: &ExtendedState,
        h_guess: f64,
        f_k: f64,
        grad_k: &AlgebraVector,
    ) -> Result<StepOutput> {
        let opts = &self.options;
        if !(h_guess >= opts.h_min && h_guess <= opts.h_max) {
            return Err(Error::StepFailure {
                t: state.t,
                residual: f64::NAN,
                reason: format!(
                    "step guess {h_guess} outside [{}, {}]",
                    opts.h_min, opts.h_max
                ),
            });
        }
        let mut search = Search {
            lgvi: self,
            state,
            f_k,
            grad_k,
            samples: Vec::new(),
            evaluations: 0,
        };
        let (trial, residual, fallback) = search.solve(h_guess)?;
        let evaluations = search.evaluations;

        let g_next = state.g.compose(&trial.relative)?;
        let grad_next = self.objective.gradient(&g_next)?;
        let mu_next = momentum_update(
            &trial.shifted,
            &trial.relative,
            &grad_next,
            &trial.schedule,
            opts.momentum_rule,
        )?;
        let energy_next = trial
            .schedule
            .energy_plus_dd(trial.kinetic, f_k, trial.f_next);
        let h = trial.schedule.h;
        Ok(StepOutput {
            state: ExtendedState {
                t: state.t + h,
                energy: energy_next.hi,
                energy_lo: energy_next.lo,
                g: g_next,
                mu: mu_next,
            },
            record: StepRecord {
                h,
                outer_iterations: evaluations,
                newton_iterations: trial.newton_iterations,
                residual,
                fallback,
            },
            relative: trial.relative,
            f_next: trial.f_next,
            grad_next,
        })
    }
}

fn check_shapes(params: &BregmanParams, g: &GroupPoint, mu: &AlgebraVector) -> Result<()> {
    let kind = params.kind();
    if g.kind() != kind || mu.len() != kind.algebra_dim() {
        return Err(Error::InvalidInput(format!(
            "state ({:?}, momentum of length {}) does not match {kind:?}",
            g.kind(),
            mu.len()
        )));
    }
    Ok(())
}

struct Sample {
    h: f64,
    r: f64,
    trial: Option<Trial>,
}

struct Search<'s, 'a> {
    lgvi: &'s Lgvi<'a>,
    state: &'s ExtendedState,
    f_k: f64,
    grad_k: &'s AlgebraVector,
    samples: Vec<Sample>,
    evaluations: usize,
}

impl Search<'_, '_> {
    fn failure(&self, reason: impl Into<String>) -> Error {
        let residual = self
            .samples
            .iter()
            .map(|s| s.r.abs())
            .fold(f64::INFINITY, f64::min);
        Error::StepFailure {
            t: self.state.t,
            residual,
            reason: reason.into(),
        }
    }

    /// Scaled energy residual at `h`, `+inf` where the step equations have no solution.
    fn residual(&mut self, h: f64) -> Result<f64> {
        if let Some(s) = self.samples.iter().find(|s| s.h == h) {
            return Ok(s.r);
        }
        if self.evaluations >= self.lgvi.options.max_outer_iterations {
            return Err(self.failure(format!(
                "no acceptable step after {} residual evaluations",
                self.evaluations
            )));
        }
        self.evaluations += 1;
        let st = self.state;
        let (r, trial) = match self
            .lgvi
            .trial(st.t, &st.g, &st.mu, self.f_k, self.grad_k, h)
        {
            Ok(trial) => {
                let minus = Dd::new(trial.energy_minus, trial.energy_minus_lo);
                let carried = Dd::new(st.energy, st.energy_lo);
                (minus.sub(carried).to_f64(), Some(trial))
            }
            Err(e) if infeasible(&e) => (f64::INFINITY, None),
            Err(e) => return Err(e),
        };
        let r = if r.is_nan() { f64::INFINITY } else { r };
        self.samples.push(Sample { h, r, trial });
        Ok(r)
    }

    /// `|r|` below the tolerance, less a margin for the rounding of the kinetic terms.
    fn acceptable(&self, r: f64) -> bool {
        r.abs() <= self.lgvi.options.h_tolerance * (1.0 - ACCEPT_MARGIN)
    }

    fn good_enough(&self, r: f64) -> bool {
        self.lgvi.options.energy_solve == EnergySolve::WithinTolerance && self.acceptable(r)
    }

    fn best(&self) -> Option<&Sample> {
        self.samples
            .iter()
            .filter(|s| s.trial.is_some())
            .min_by(|a, b| a.r.abs().total_cmp(&b.r.abs()))
    }

    fn solve(&mut self, h0: f64) -> Result<(Trial, f64, bool)> {
        let r0 = self.residual(h0)?;
        let found = if r0 == 0.0 || self.good_enough(r0) {
            Some(h0)
        } else {
            match self.local_bracket(h0, r0)? {
                Some((lo, hi)) => Some(self.brent(lo, hi)?),
                None => None,
            }
        };
        if found.is_none() {
            // least squares near the previous step
            self.golden_section(h0)?;
            if let Some(best) = self.best() {
                if self.acceptable(best.r) {
                    let r = best.r.abs();
                    let trial = best.trial.clone().expect("feasible sample");
                    return Ok((trial, r, true));
                }
            }
            if let Some((lo, hi)) = self.wide_bracket(h0)? {
                self.brent(lo, hi)?;
            }
        }
        match self.best() {
            Some(best) if self.acceptable(best.r) => {
                let r = best.r.abs();
                Ok((best.trial.clone().expect("feasible sample"), r, false))
            }
            _ => Err(self.failure("energy equation has no root in [h_min, h_max]")),
        }
    }

    /// Sign change of `r` within a factor `LOCAL_SPAN` of `h0`.
    fn local_bracket(&mut self, h0: f64, r0: f64) -> Result<Option<(f64, f64)>> {
        let opts = self.lgvi.options;
        if r0 < 0.0 {
            let limit = (h0 * LOCAL_SPAN).min(opts.h_max);
            let mut lo = h0;
            while lo < limit {
                let h = (lo * GROWTH).min(limit);
                let r = self.residual(h)?;
                if r.is_infinite() {
                    return self.refine_feasible(lo, h);
                }
                if r >= 0.0 {
                    return Ok(Some((lo, h)));
                }
                lo = h;
            }
        } else {
            let limit = (h0 / LOCAL_SPAN).max(opts.h_min);
            let (mut hi, mut r_hi) = (h0, r0);
            while hi > limit {
                let h = (hi / GROWTH).max(limit);
                let r = self.residual(h)?;
                if r <= 0.0 {
                    if r_hi.is_infinite() {
                        return self.refine_feasible(h, hi);
                    }
                    return Ok(Some((h, hi)));
                }
                hi = h;
                r_hi = r;
            }
        }
        Ok(None)
    }

    /// Given `r(lo) < 0` and `r(hi) = +inf`, looks for a feasible `h` in between with
    /// `r(h) >= 0` by bisection in `log h`.
    fn refine_feasible(&mut self, mut lo: f64, mut hi: f64) -> Result<Option<(f64, f64)>> {
        for _ in 0..40 {
            if hi / lo - 1.0 <= 1e-12 {
                break;
            }
            let mid = (lo * hi).sqrt();
            let r = self.residual(mid)?;
            if r.is_infinite() {
                hi = mid;
            } else if r >= 0.0 {
                return Ok(Some((lo, mid)));
            } else {
                lo = mid;
            }
        }
        Ok(None)
    }

    /// Brent-Dekker zero finder on a bracket with `r(lo) <= 0 <= r(hi)`. In exact mode it
    /// runs until the bracket is a few ulps wide: the residual is far too flat in `h` at late
    /// times for a residual-based stop to track the root.
    fn brent(&mut self, lo: f64, hi: f64) -> Result<f64> {
        let (mut a, mut b) = (lo, hi);
        let (mut fa, mut fb) = (self.residual(a)?, self.residual(b)?);
        let (mut c, mut fc) = (a, fa);
        let (mut d, mut e) = (b - a, b - a);
        loop {
            if fb.signum() == fc.signum() {
                c = a;
                fc = fa;
                d = b - a;
                e = d;
            }
            if fc.abs() < fb.abs() {
                (a, b, c) = (b, c, b);
                (fa, fb, fc) = (fb, fc, fb);
            }
            let tol = 2.0 * f64::EPSILON * b.abs();
            let m = 0.5 * (c - b);
            if m.abs() <= tol || fb == 0.0 || self.good_enough(fb) {
                return Ok(b);
            }
            if e.abs() < tol || fa.abs() <= fb.abs() || !fa.is_finite() {
                d = m;
                e = m;
            } else {
                // inverse quadratic interpolation, or secant when only two points differ
                let s = fb / fa;
                let (mut p, mut q) = if a == c {
                    (2.0 * m * s, 1.0 - s)
                } else {
                    let q = fa / fc;
                    let r = fb / fc;
                    (
                        s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                        (q - 1.0) * (r - 1.0) * (s - 1.0),
                    )
                };
                if p > 0.0 {
                    q = -q;
                } else {
                    p = -p;
                }
                if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                    e = d;
                    d = p / q;
                } else {
                    d = m;
                    e = m;
                }
            }
            a = b;
            fa = fb;
            b += if d.abs() > tol { d } else { tol.copysign(m) };
            fb = self.residual(b)?;
        }
    }

    /// Minimizes `|r|` over `log h` in `[h0/2, 2 h0]`.
    fn golden_section(&mut self, h0: f64) -> Result<()> {
        let opts = self.lgvi.options;
        let mut a = (h0 / 2.0).max(opts.h_min).ln();
        let mut b = (h0 * 2.0).min(opts.h_max).ln();
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = self.residual(c.exp())?.abs();
        let mut fd = self.residual(d.exp())?.abs();
        for _ in 0..GOLDEN_ITERATIONS {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = self.residual(c.exp())?.abs();
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = self.residual(d.exp())?.abs();
            }
        }
        Ok(())
    }

    /// Sign change anywhere in `[h_min, h_max]`, scanning outward from `h0` by factors of 2.
    fn wide_bracket(&mut self, h0: f64) -> Result<Option<(f64, f64)>> {
        let opts = self.lgvi.options;
        let mut grid = vec![h0];
        let mut h = h0;
        while h / 2.0 >= opts.h_min {
            h /= 2.0;
            grid.insert(0, h);
        }
        let mut h = h0;
        while h * 2.0 <= opts.h_max {
            h *= 2.0;
            grid.push(h);
        }
        let mut previous: Option<(f64, f64)> = None;
        for &h in &grid {
            let r = self.residual(h)?;
            if let Some((hp, rp)) = previous {
                if rp < 0.0 && r.is_infinite() {
                    if let Some(b) = self.refine_feasible(hp, h)? {
                        return Ok(Some(b));
                    }
                } else if rp.is_finite() && r.is_finite() && rp * r <= 0.0 {
                    return Ok(Some((hp, h)));
                }
            }
            previous = Some((h, r));
        }
        Ok(None)
    }
}

/// Initial extended state `(t_0, E_0, g_0, mu_0)` with `E_0 = E^-_0(h_0)`.
pub fn lgvi_init(
    t0: f64,
    g0: GroupPoint,
    mu0: AlgebraVector,
    h0: f64,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<ExtendedState> {
    Lgvi::new(params, objective, SolverOptions::default())?.init(t0, g0, mu0, h0)
}

/// One adaptive step starting from the step-size guess `h_guess` (usually `h_{k-1}`).
pub fn lgvi_step(
    state: &ExtendedState,
    h_guess: f64,
    params: &BregmanParams,
    objective: &dyn Objective,
    options: SolverOptions,
) -> Result<(ExtendedState, StepRecord)> {
    let out = Lgvi::new(params, objective, options)?.step(state, h_guess)?;
    Ok((out.state, out.record))
}
