//! CSV export. Column orders:
//!
//! - `rmse_vs_time.csv`: `t, <one column per algorithm>, sp_crlb`
//! - `rmse_cdf.csv`: `window_start, window_end, algorithm, rmse, cumulative_frequency`
//! - `traces_<algorithm>.csv`: `run, n, t, true_x, true_y, est_x, est_y,
//!   est_vx, est_vy, sq_error, u_1..u_J, q_1..q_J, lost`
//! - `summary.csv`: `algorithm, mean_rmse, mean_rmse_pre_olos, final_rmse,
//!   lost_runs, final_error_gt_5m`
//!
//! plus `manifest.toml` holding the build and the resolved config, which
//! `ExperimentConfig::load` accepts for a rerun.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::{BuildInfo, Manifest};
use super::experiment::{Experiment, StepRecord};
use super::stats::{final_error_rate, mean_over_window, rmse_cdf, rmse_over_time, TimeWindow};
use crate::error::Result;
use crate::simulator::ScenarioConfig;

/// Evaluation windows: the whole run, and the part before the first
/// window that blocks every anchor, if there is one.
pub fn evaluation_windows(scenario: &ScenarioConfig) -> Vec<TimeWindow> {
    let mut out = vec![TimeWindow::new(0.0, scenario.duration)];
    let full = scenario
        .olos_windows
        .iter()
        .filter(|w| scenario.anchors.iter().all(|a| w.anchors.contains(&a.id)))
        .map(|w| w.start)
        .fold(f64::INFINITY, f64::min);
    if full > 0.0 && full < scenario.duration {
        out.push(TimeWindow::new(0.0, full));
    }
    out
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Per-algorithm RMSE series.
pub fn rmse_table(exp: &Experiment) -> Result<Vec<Vec<f64>>> {
    exp.results.iter().map(|r| rmse_over_time(r)).collect()
}

pub fn write_rmse_vs_time(exp: &Experiment, rmse: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend(exp.config.algorithms.iter().map(|a| a.label()));
    header.push("sp_crlb".into());
    w.write_record(&header)?;
    for (n, &t) in exp.times.iter().enumerate() {
        let mut row = vec![num(t)];
        row.extend(rmse.iter().map(|s| num(s[n])));
        row.push(num(exp.sp_crlb[n]));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rmse_cdf(exp: &Experiment, rmse: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["window_start", "window_end", "algorithm", "rmse", "cumulative_frequency"])?;
    for win in evaluation_windows(&exp.config.scenario) {
        for (a, series) in exp.config.algorithms.iter().zip(rmse) {
            for (e, f) in rmse_cdf(series, &exp.times, win)? {
                w.write_record([num(win.start), num(win.end), a.label(), num(e), num(f)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn trace_header(num_anchors: usize, truth: bool) -> Vec<String> {
    let mut h: Vec<String> = vec!["run".into(), "n".into(), "t".into()];
    if truth {
        h.extend(["true_x", "true_y"].map(String::from));
    }
    h.extend(["est_x", "est_y", "est_vx", "est_vy"].map(String::from));
    if truth {
        h.push("sq_error".into());
    }
    h.extend((1..=num_anchors).map(|j| format!("u_{j}")));
    h.extend((1..=num_anchors).map(|j| format!("q_{j}")));
    h.push("lost".into());
    h
}

fn trace_row(run: usize, n: usize, s: &StepRecord, truth: Option<(f64, f64)>) -> Vec<String> {
    let mut row = vec![run.to_string(), n.to_string(), num(s.time)];
    if let Some((x, y)) = truth {
        row.push(num(x));
        row.push(num(y));
    }
    let e = &s.estimate;
    row.extend([e.p.x, e.p.y, e.v.x, e.v.y].map(num));
    if let Some((x, y)) = truth {
        row.push(num((e.p.x - x).powi(2) + (e.p.y - y).powi(2)));
    }
    row.extend(s.amplitudes.iter().map(|&u| num(u)));
    row.extend(s.los_probs.iter().map(|&q| num(q)));
    row.push(u8::from(s.lost).to_string());
    row
}

pub fn write_traces(exp: &Experiment, algorithm: usize, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(exp.config.scenario.anchors.len(), true))?;
    for res in &exp.results[algorithm] {
        for (i, (s, p)) in res.steps.iter().zip(&res.truth).enumerate() {
            w.write_record(trace_row(res.run, i + 1, s, Some((p.x, p.y))))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Estimates of a filter run without ground truth (`track` on a scan file):
/// the trace columns minus `true_x`, `true_y` and `sq_error`.
pub fn write_estimates(runs: &[(usize, Vec<StepRecord>)], num_anchors: usize, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(trace_header(num_anchors, false))?;
    for (run, steps) in runs {
        for (i, s) in steps.iter().enumerate() {
            w.write_record(trace_row(*run, i + 1, s, None))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(exp: &Experiment, rmse: &[Vec<f64>], path: &Path) -> Result<()> {
    let windows = evaluation_windows(&exp.config.scenario);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "algorithm",
        "mean_rmse",
        "mean_rmse_pre_olos",
        "final_rmse",
        "lost_runs",
        "final_error_gt_5m",
    ])?;
    for ((a, series), runs) in exp.config.algorithms.iter().zip(rmse).zip(&exp.results) {
        let full = mean_over_window(series, &exp.times, windows[0])?;
        let pre = match windows.get(1) {
            Some(win) => mean_over_window(series, &exp.times, *win)?,
            None => full,
        };
        w.write_record([
            a.label(),
            num(full),
            num(pre),
            num(*series.last().unwrap_or(&0.0)),
            runs.iter().filter(|r| r.lost_step.is_some()).count().to_string(),
            num(final_error_rate(runs, 5.0)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_manifest(exp: &Experiment, path: &Path) -> Result<()> {
    let m = Manifest {
        build: BuildInfo::current(),
        config: exp.config.clone(),
    };
    fs::write(path, toml::to_string(&m)?)?;
    Ok(())
}

/// Writes every output file into `dir` (created if needed) and returns the
/// paths written.
pub fn export(exp: &Experiment, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let rmse = rmse_table(exp)?;
    let mut written = Vec::new();
    let p = dir.join("rmse_vs_time.csv");
    write_rmse_vs_time(exp, &rmse, &p)?;
    written.push(p);
    let p = dir.join("rmse_cdf.csv");
    write_rmse_cdf(exp, &rmse, &p)?;
    written.push(p);
    for (i, a) in exp.config.algorithms.iter().enumerate() {
        let p = dir.join(format!("traces_{}.csv", a.label()));
        write_traces(exp, i, &p)?;
        written.push(p);
    }
    let p = dir.join("summary.csv");
    write_summary(exp, &rmse, &p)?;
    written.push(p);
    let p = dir.join("manifest.toml");
    write_manifest(exp, &p)?;
    written.push(p);
    Ok(written)
}
