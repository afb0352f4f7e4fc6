//! Line-delimited scan files, so other filters can consume the exact same
//! data.
//!
//! One JSON object per line, one line per (run, time step, anchor), fields
//! in this order:
//!
//! ```text
//! {"run":0,"time_index":1,"time":0.0,"anchor":1,
//!  "measurements":[[d_hat,u_hat,sigma_d_hat],...],"los":[true,false,...]}
//! ```
//!
//! `time_index` counts from 1 and `time = (time_index - 1) * dt`. `los[m]`
//! is the ground-truth origin of `measurements[m]` and is ignored by the
//! tracker. Lines are ordered by run, then time, then anchor.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{ScenarioConfig, SimRun};
use crate::types::{Measurement, Scan};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub run: usize,
    pub time_index: usize,
    pub time: f64,
    pub anchor: usize,
    pub measurements: Vec<[f64; 3]>,
    pub los: Vec<bool>,
}

impl ScanRecord {
    pub fn scan(&self) -> Scan {
        Scan::new(
            self.anchor,
            self.time_index,
            self.measurements.iter().map(|m| Measurement::new(m[0], m[1], m[2])).collect(),
        )
    }
}

/// Appends all scans of one simulated run.
pub fn write_run<W: Write>(out: &mut W, run: usize, sim: &SimRun, config: &ScenarioConfig) -> Result<()> {
    for (step, scans) in sim.scans.iter().enumerate() {
        for s in scans {
            let rec = ScanRecord {
                run,
                time_index: s.scan.time_index,
                time: config.time_of(step + 1),
                anchor: s.scan.anchor_id,
                measurements: s.scan.measurements.iter().map(|m| [m.d_hat, m.u_hat, m.sigma_d_hat]).collect(),
                los: s.los.clone(),
            };
            serde_json::to_writer(&mut *out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<ScanRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScanRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Validation(format!("scan file line {}: {e}", i + 1)))?;
        if rec.los.len() != rec.measurements.len() {
            return Err(Error::Validation(format!(
                "scan file line {}: {} measurements but {} LOS flags",
                i + 1,
                rec.measurements.len(),
                rec.los.len()
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Groups records into per-run sequences of time steps, each holding one
/// scan per anchor in anchor order. Every run must cover time steps
/// `1..=N` for all `num_anchors` anchors exactly once.
pub fn group_runs(records: &[ScanRecord], num_anchors: usize) -> Result<BTreeMap<usize, Vec<Vec<Scan>>>> {
    let mut slots: BTreeMap<usize, BTreeMap<usize, Vec<Option<Scan>>>> = BTreeMap::new();
    for rec in records {
        if rec.anchor == 0 || rec.anchor > num_anchors {
            return Err(Error::Validation(format!(
                "run {} step {}: unknown anchor {}",
                rec.run, rec.time_index, rec.anchor
            )));
        }
        let step = slots
            .entry(rec.run)
            .or_default()
            .entry(rec.time_index)
            .or_insert_with(|| vec![None; num_anchors]);
        if step[rec.anchor - 1].replace(rec.scan()).is_some() {
            return Err(Error::Validation(format!(
                "run {} step {}: duplicate scan for anchor {}",
                rec.run, rec.time_index, rec.anchor
            )));
        }
    }
    let mut out = BTreeMap::new();
    for (run, steps) in slots {
        let mut seq = Vec::with_capacity(steps.len());
        for (k, (n, scans)) in steps.into_iter().enumerate() {
            if n != k + 1 {
                return Err(Error::Validation(format!("run {run}: time step {} missing", k + 1)));
            }
            let scans: Option<Vec<Scan>> = scans.into_iter().collect();
            seq.push(scans.ok_or_else(|| Error::Validation(format!("run {run} step {n}: missing anchor scan")))?);
        }
        out.insert(run, seq);
    }
    Ok(out)
}
