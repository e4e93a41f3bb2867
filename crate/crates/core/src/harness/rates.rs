//! Power-law rate fitting on log-log axes.

use crate::error::{Error, Result};
use crate::harness::run::TrajectoryRecord;

/// Fewest points a fit window must contain.
pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares slope of `ln(value)` against `ln(abscissa)` over points whose abscissa lies
/// in `[window.0, window.1]`.
pub fn fit_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::Domain(format!(
            "fit window [{lo}, {hi}] must satisfy 0 < lo < hi"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(x, y) in series.iter().filter(|(x, _)| *x >= lo && *x <= hi) {
        if !(y > 0.0) {
            return Err(Error::Domain(format!(
                "nonpositive value {y} at abscissa {x}"
            )));
        }
        xs.push(x.ln());
        ys.push(y.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidInput(format!(
            "{} points in [{lo}, {hi}], need at least {MIN_FIT_POINTS}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae in the window coincide".into()));
    }
    Ok(sxy / sxx)
}

/// `[x_max / 10, x_max]` for the largest positive abscissa of the series.
pub fn final_decade(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    let x_max = series
        .iter()
        .map(|p| p.0)
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !(x_max > 0.0) {
        return Err(Error::Domain("series has no positive abscissa".into()));
    }
    Ok((x_max / 10.0, x_max))
}

/// Which trajectory column is fitted against which.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSeries {
    /// `f - f*` against `t`.
    GapVsTime,
    /// `f - f*` against `k` (row 0 excluded).
    GapVsStep,
    /// `h_k` against `t`.
    StepVsTime,
}

pub fn series(records: &[TrajectoryRecord], which: RateSeries) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| which != RateSeries::GapVsStep || r.k > 0)
        .map(|r| match which {
            RateSeries::GapVsTime => (r.t, r.f_gap),
            RateSeries::GapVsStep => (r.k as f64, r.f_gap),
            RateSeries::StepVsTime => (r.t, r.h),
        })
        .collect()
}

/// Fit over `window`, or over the final decade of the abscissa when `window` is `None`.
pub fn fit_records(
    records: &[TrajectoryRecord],
    which: RateSeries,
    window: Option<(f64, f64)>,
) -> Result<f64> {
    let s = series(records, which);
    let w = match window {
        Some(w) => w,
        None => final_decade(&s)?,
    };
    fit_rate(&s, w)
}
