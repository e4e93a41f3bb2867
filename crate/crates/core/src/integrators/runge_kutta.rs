//! Classical RK4 and the Dormand-Prince 5(4) pair, used on the embedded coordinates of the
//! SO(3) Bregman flow. Nothing here projects back onto the group.

use nalgebra::{Matrix3, SVector, Vector3};

use crate::bregman::{so3_angular_acceleration, BregmanParams};
use crate::error::{Error, Result};
use crate::lie::{hat, GroupKind, GroupPoint};
use crate::objectives::Objective;

/// `R` flattened row-major into the first nine entries, `Omega` in the last three.
pub type EmbeddedState = SVector<f64, 12>;

pub fn embed(rotation: &Matrix3<f64>, omega: &Vector3<f64>) -> EmbeddedState {
    let mut y = EmbeddedState::zeros();
    for i in 0..3 {
        for j in 0..3 {
            y[3 * i + j] = rotation[(i, j)];
        }
    }
    y.fixed_rows_mut::<3>(9).copy_from(omega);
    y
}

/// Inverse of [`embed`]; the matrix is returned as is, orthogonal or not.
pub fn unembed(y: &EmbeddedState) -> (Matrix3<f64>, Vector3<f64>) {
    let r = Matrix3::from_fn(|i, j| y[3 * i + j]);
    (r, y.fixed_rows::<3>(9).into_owned())
}

/// `R_dot = R hat(Omega)` together with the angular acceleration of the Bregman flow.
pub fn so3_embedded_rhs(
    t: f64,
    y: &EmbeddedState,
    params: &BregmanParams,
    objective: &dyn Objective,
) -> Result<EmbeddedState> {
    if params.kind() != GroupKind::So3 {
        return Err(Error::Unsupported(
            "embedded Runge-Kutta form is SO(3) only".into(),
        ));
    }
    let (r, omega) = unembed(y);
    // the matrix may have drifted off SO(3); the objective sees it unchecked
    let grad = objective.gradient(&GroupPoint::So3(r))?.head3();
    let omega_dot = so3_angular_acceleration(t, &omega, &grad, params)?;
    Ok(embed(&(r * hat(&omega)), &omega_dot))
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize, F>(
    mut rhs: F,
    t: f64,
    y: &SVector<f64, N>,
    h: f64,
) -> Result<SVector<f64, N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * h, &(y + k1 * (0.5 * h)))?;
    let k3 = rhs(t + 0.5 * h, &(y + k2 * (0.5 * h)))?;
    let k4 = rhs(t + h, &(y + k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk45Options {
    pub atol: f64,
    pub rtol: f64,
    /// First trial step; chosen automatically when `None`.
    pub h_initial: Option<f64>,
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options {
            atol: 1e-8,
            rtol: 1e-8,
            h_initial: None,
            max_steps: 10_000_000,
        }
    }
}

/// Accepted steps of an adaptive integration, including the initial point.
#[derive(Debug, Clone)]
pub struct Rk45Trajectory<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<SVector<f64, N>>,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand-Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

fn error_norm<const N: usize>(
    err: &SVector<f64, N>,
    y: &SVector<f64, N>,
    y_new: &SVector<f64, N>,
    opts: &Rk45Options,
) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

/// Dormand-Prince stepper that can be advanced one accepted step at a time.
#[derive(Debug, Clone)]
pub struct Rk45Stepper<const N: usize> {
    pub t: f64,
    pub y: SVector<f64, N>,
    /// Next trial step.
    pub h: f64,
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    k1: SVector<f64, N>,
    opts: Rk45Options,
}

impl<const N: usize> Rk45Stepper<N> {
    pub fn new<F>(rhs: &mut F, t0: f64, y0: SVector<f64, N>, opts: &Rk45Options) -> Result<Self>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
    {
        if !(opts.atol > 0.0) || !(opts.rtol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        let k1 = rhs(t0, &y0)?;
        let mut evaluations = 1;
        let h = match opts.h_initial {
            Some(h) if h > 0.0 => h,
            Some(h) => {
                return Err(Error::InvalidInput(format!(
                    "initial step must be positive (got {h})"
                )))
            }
            None => {
                evaluations += 1;
                initial_step(rhs, t0, &y0, &k1, opts)?
            }
        };
        Ok(Rk45Stepper {
            t: t0,
            y: y0,
            h,
            steps: 0,
            rejected: 0,
            evaluations,
            k1,
            opts: *opts,
        })
    }

    /// Takes one accepted step, shortened if needed so that `t` does not pass `t_end`.
    pub fn advance<F>(&mut self, rhs: &mut F, t_end: f64) -> Result<()>
    where
        F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
    {
        let (t, y, k1) = (self.t, self.y, self.k1);
        if !(t_end > t) {
            return Err(Error::InvalidInput(format!(
                "cannot advance from {t} to {t_end}"
            )));
        }
        if self.steps >= self.opts.max_steps {
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("step limit {} reached", self.opts.max_steps),
            });
        }
        let mut h = self.h.min(t_end - t);
        loop {
            if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::IntegrationFailure {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let last = t + h >= t_end;
            if last {
                h = t_end - t;
            }
            let k2 = rhs(t + C2 * h, &(y + k1 * (h * A21)))?;
            let k3 = rhs(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h))?;
            let k4 = rhs(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h))?;
            let k5 = rhs(
                t + C5 * h,
                &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
            )?;
            let k6 = rhs(
                t + h,
                &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
            )?;
            let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
            let k7 = rhs(t + h, &y_new)?;
            self.evaluations += 6;
            let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let en = error_norm(&err, &y, &y_new, &self.opts);
            if en.is_finite() && en <= 1.0 {
                self.t = if last { t_end } else { t + h };
                self.y = y_new;
                self.k1 = k7;
                self.steps += 1;
                let factor = if en == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a step cut short by t_end says nothing about the next one
                self.h = if last {
                    self.h.max(h * factor)
                } else {
                    h * factor
                };
                return Ok(());
            }
            self.rejected += 1;
            let factor = if en.is_finite() {
                (SAFETY * en.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
            } else {
                MIN_FACTOR
            };
            h *= factor;
        }
    }
}

/// Adaptive Dormand-Prince integration from `t0` to `t1`, ending exactly at `t1`.
pub fn rk45_integrate<const N: usize, F>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: SVector<f64, N>,
    opts: &Rk45Options,
) -> Result<Rk45Trajectory<N>>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("empty time span [{t0}, {t1}]")));
    }
    let mut stepper = Rk45Stepper::new(&mut rhs, t0, y0, opts)?;
    let mut times = vec![t0];
    let mut states = vec![y0];
    while stepper.t < t1 {
        stepper.advance(&mut rhs, t1)?;
        times.push(stepper.t);
        states.push(stepper.y);
    }
    Ok(Rk45Trajectory {
        times,
        states,
        rejected: stepper.rejected,
        evaluations: stepper.evaluations,
    })
}

/// Starting step heuristic of Hairer, Norsett and Wanner (II.4).
fn initial_step<const N: usize, F>(
    rhs: &mut F,
    t: f64,
    y: &SVector<f64, N>,
    f0: &SVector<f64, N>,
    opts: &Rk45Options,
) -> Result<f64>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let scale = y.map(|v| opts.atol + opts.rtol * v.abs());
    let rms = |v: &SVector<f64, N>| (v.component_div(&scale).norm_squared() / N as f64).sqrt();
    let d0 = rms(y);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let f1 = rhs(t + h0, &(y + f0 * h0))?;
    let d2 = rms(&(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}
