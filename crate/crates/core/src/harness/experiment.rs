use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Algorithm, ExperimentConfig};
use crate::crlb::sp_crlb;
use crate::error::{Error, Result};
use crate::filter::{Filter, FilterParams};
use crate::simulator::{gen_trajectory, los_amplitude, simulate, ScenarioConfig};
use crate::types::{los_distance, AgentState, Anchor, Scan, Vec2};

/// Filter output at one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub estimate: AgentState,
    /// MMSE amplitude per anchor.
    pub amplitudes: Vec<f64>,
    /// MMSE LOS probability per anchor.
    pub los_probs: Vec<f64>,
    /// Set when the update failed and the predicted belief was kept.
    pub lost: bool,
}

/// One realization of one algorithm.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub run: usize,
    pub truth: Vec<Vec2>,
    pub steps: Vec<StepRecord>,
    /// First step (1-based) at which the track was lost.
    pub lost_step: Option<usize>,
}

impl RunResult {
    pub fn squared_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.truth.iter().zip(&self.steps).map(|(t, s)| (s.estimate.p - t).norm_squared())
    }

    pub fn final_error(&self) -> f64 {
        self.squared_errors().last().unwrap_or(0.0).sqrt()
    }
}

/// All runs of a study, grouped per algorithm in configuration order.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub times: Vec<f64>,
    pub trajectory: Vec<AgentState>,
    /// Single-position bound along the true trajectory.
    pub sp_crlb: Vec<f64>,
    /// `results[a][r]`: algorithm `a`, run `r`.
    pub results: Vec<Vec<RunResult>>,
}

/// Rng of run `r`: the master seed with stream `2r` for the simulator and
/// `2r + 1` for the filters. Every algorithm of a run sees the same scans
/// and starts from the same filter stream.
pub fn run_rng(seed: u64, run: usize, filter: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * run as u64 + filter as u64);
    rng
}

/// Runs a filter over a scan sequence. Steps where the update fails with a
/// lost track keep the predicted belief and are flagged.
pub fn run_filter(
    params: FilterParams,
    anchors: &[Anchor],
    scans: &[Vec<Scan>],
    times: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<StepRecord>> {
    let mut filter = Filter::new(params, anchors.to_vec(), rng)?;
    scans
        .iter()
        .zip(times)
        .map(|(s, &time)| {
            let (est, lost) = match filter.step(s, rng) {
                Ok(e) => (e, false),
                Err(Error::TrackLost) => (filter.estimate(), true),
                Err(e) => return Err(e),
            };
            Ok(StepRecord {
                time,
                estimate: est.state,
                amplitudes: est.amplitudes,
                los_probs: est.los_probs,
                lost,
            })
        })
        .collect()
}

fn one_run(config: &ExperimentConfig, params: &[FilterParams], times: &[f64], run: usize) -> Result<Vec<RunResult>> {
    let sim = simulate(&config.scenario, &mut run_rng(config.seed, run, false))?;
    let scans: Vec<Vec<Scan>> = sim
        .scans
        .iter()
        .map(|step| step.iter().map(|s| s.scan.clone()).collect())
        .collect();
    let truth: Vec<Vec2> = sim.trajectory.iter().map(|x| x.p).collect();
    params
        .iter()
        .map(|p| {
            let steps = run_filter(
                p.clone(),
                &config.scenario.anchors,
                &scans,
                times,
                &mut run_rng(config.seed, run, true),
            )?;
            let lost_step = steps.iter().position(|s| s.lost).map(|i| i + 1);
            Ok(RunResult {
                run,
                truth: truth.clone(),
                steps,
                lost_step,
            })
        })
        .collect()
}

/// Single-position bound at every true position, with each anchor's range
/// std taken from the mean LOS amplitude at the true distance.
pub fn sp_crlb_curve(scenario: &ScenarioConfig, trajectory: &[AgentState]) -> Result<Vec<f64>> {
    let crlb = scenario.crlb()?;
    trajectory
        .iter()
        .map(|x| {
            let sigmas = scenario
                .anchors
                .iter()
                .map(|a| crlb.sigma_from_amplitude(los_amplitude(los_distance(&x.p, a), scenario)))
                .collect::<Result<Vec<_>>>()?;
            sp_crlb(&x.p, &scenario.anchors, &sigmas)
        })
        .collect()
}

/// Runs every configured algorithm on `runs` independent realizations.
/// Results do not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let params = config
        .algorithms
        .iter()
        .map(|a| config.filter_params(a))
        .collect::<Result<Vec<_>>>()?;
    let trajectory = gen_trajectory(&config.scenario)?;
    let times: Vec<f64> = (1..=trajectory.len()).map(|n| config.scenario.time_of(n)).collect();
    let sp = sp_crlb_curve(&config.scenario, &trajectory)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    log::info!(
        "{} runs x {} algorithms on {} workers",
        config.runs,
        config.algorithms.len(),
        pool.current_num_threads()
    );
    let per_run: Vec<Vec<RunResult>> = pool.install(|| {
        (0..config.runs)
            .into_par_iter()
            .map(|r| {
                let res = one_run(config, &params, &times, r);
                log::debug!("run {r} done");
                res
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut results: Vec<Vec<RunResult>> = vec![Vec::with_capacity(config.runs); config.algorithms.len()];
    for run in per_run {
        for (a, res) in run.into_iter().enumerate() {
            results[a].push(res);
        }
    }
    Ok(Experiment {
        config: config.clone(),
        times,
        trajectory,
        sp_crlb: sp,
        results,
    })
}

impl Experiment {
    pub fn algorithm_index(&self, label: &str) -> Option<usize> {
        self.config.algorithms.iter().position(|a| a.label() == label)
    }

    pub fn runs_of(&self, algorithm: &Algorithm) -> Option<&[RunResult]> {
        self.algorithm_index(&algorithm.label()).map(|i| &self.results[i][..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::Variant;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            runs: 3,
            seed: 11,
            workers: 2,
            algorithms: vec![Algorithm::Named(Variant::AL1), Algorithm::Named(Variant::AL5)],
            ..ExperimentConfig::default()
        };
        cfg.scenario.duration = 2.0;
        cfg.filter.r_init = 2000;
        cfg.filter.r_track = 200;
        cfg.filter.r_u = 200;
        cfg
    }

    #[test]
    fn shapes_and_worker_independence() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.results.len(), 2);
        assert_eq!(a.times.len(), 40);
        assert_eq!(a.sp_crlb.len(), 40);
        for runs in &a.results {
            assert_eq!(runs.len(), 3);
            for (r, res) in runs.iter().enumerate() {
                assert_eq!(res.run, r);
                assert_eq!(res.steps.len(), 40);
                assert_eq!(res.steps[0].amplitudes.len(), 3);
            }
        }
        let b = run_experiment(&ExperimentConfig { workers: 1, ..cfg }).unwrap();
        assert_eq!(a.results, b.results);
    }

    #[test]
    fn runs_use_distinct_streams() {
        let a = run_experiment(&small_config()).unwrap();
        assert_ne!(a.results[0][0].steps, a.results[0][1].steps);
        assert_eq!(a.results[0][0].truth, a.results[1][0].truth);
    }

    #[test]
    fn clean_sanity_run() {
        let mut cfg = ExperimentConfig {
            runs: 1,
            algorithms: vec![Algorithm::Named(Variant::AL5)],
            ..ExperimentConfig::default()
        };
        cfg.scenario.clutter_rate = 0.0;
        cfg.scenario.olos_windows.clear();
        let e = run_experiment(&cfg).unwrap();
        let res = &e.results[0][0];
        assert_eq!(res.steps.len(), 400);
        assert!(res.lost_step.is_none());
        assert!(res.final_error() < 0.1, "final error {}", res.final_error());
    }

    #[test]
    fn bound_is_positive_and_grows_with_distance() {
        let cfg = ScenarioConfig::default();
        let traj = gen_trajectory(&cfg).unwrap();
        let sp = sp_crlb_curve(&cfg, &traj).unwrap();
        assert!(sp.iter().all(|&s| s > 0.0 && s.is_finite()));
        // the agent approaches the anchors
        assert!(sp[0] > 5.0 * sp[390]);
    }
}
