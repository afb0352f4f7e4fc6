use serde::{Deserialize, Serialize};

use super::experiment::RunResult;
use crate::error::{Error, Result};

/// Half-open time interval `[start, end)` in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        crate::simulator::in_window(t, self.start, self.end)
    }
}

/// Per-step RMSE across runs: `sqrt(mean_r |p_hat - p|^2)`. Lost runs are
/// included with their errors.
pub fn rmse_over_time(results: &[RunResult]) -> Result<Vec<f64>> {
    let first = results
        .first()
        .ok_or_else(|| Error::Validation("RMSE needs at least one run".into()))?;
    let n = first.steps.len();
    let mut acc = vec![0.0; n];
    for r in results {
        if r.steps.len() != n || r.truth.len() != n {
            return Err(Error::Validation(format!("run {} has a different length", r.run)));
        }
        for (a, e) in acc.iter_mut().zip(r.squared_errors()) {
            *a += e;
        }
    }
    Ok(acc.into_iter().map(|s| (s / results.len() as f64).sqrt()).collect())
}

fn windowed<'a>(series: &'a [f64], times: &'a [f64], window: TimeWindow) -> Result<Vec<f64>> {
    if series.len() != times.len() {
        return Err(Error::Validation("series and time axis differ in length".into()));
    }
    let v: Vec<f64> = series
        .iter()
        .zip(times)
        .filter(|(_, &t)| window.contains(t))
        .map(|(&s, _)| s)
        .collect();
    if v.is_empty() {
        return Err(Error::Validation(format!(
            "no samples in [{}, {})",
            window.start, window.end
        )));
    }
    Ok(v)
}

/// Empirical CDF of the RMSE values inside `window`: sorted levels paired
/// with the cumulative frequency `k / n`.
pub fn rmse_cdf(series: &[f64], times: &[f64], window: TimeWindow) -> Result<Vec<(f64, f64)>> {
    let mut v = windowed(series, times, window)?;
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(v.into_iter().enumerate().map(|(k, e)| (e, (k + 1) as f64 / n)).collect())
}

pub fn mean_over_window(series: &[f64], times: &[f64], window: TimeWindow) -> Result<f64> {
    let v = windowed(series, times, window)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Fraction of runs whose final position error exceeds `threshold`.
pub fn final_error_rate(results: &[RunResult], threshold: f64) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    results.iter().filter(|r| r.final_error() > threshold).count() as f64 / results.len() as f64
}
