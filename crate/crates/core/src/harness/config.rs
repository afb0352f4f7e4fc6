use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterFeatures, FilterParams, Variant};
use crate::motion::{default_los_grid, AmplitudeWalk, KinematicModel};
use crate::simulator::ScenarioConfig;
use crate::types::AmplitudeParams;

/// A named ladder variant or a custom feature set with its own label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Algorithm {
    Named(Variant),
    Custom {
        name: String,
        #[serde(flatten)]
        features: FilterFeatures,
    },
}

impl Algorithm {
    pub fn features(&self) -> FilterFeatures {
        match self {
            Algorithm::Named(v) => v.features(),
            Algorithm::Custom { features, .. } => *features,
        }
    }

    /// Label used in file names and CSV headers.
    pub fn label(&self) -> String {
        match self {
            Algorithm::Named(v) => v.to_string(),
            Algorithm::Custom { name, .. } => name.clone(),
        }
    }

    /// Parses a comma-separated list of variant names.
    pub fn parse_list(s: &str) -> Result<Vec<Algorithm>> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.parse().map(Algorithm::Named))
            .collect()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Inference-side settings shared by all variants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Particles before the first update.
    pub r_init: usize,
    /// Particles while tracking.
    pub r_track: usize,
    /// Amplitude particles per anchor.
    pub r_u: usize,
    /// Acceleration noise std, m/s².
    pub sigma_a: f64,
    /// Amplitude random-walk std.
    pub sigma_u: f64,
    /// Detection threshold on the normalized amplitude.
    pub gamma: f64,
    pub u_max: f64,
    /// LOS probability when it is not tracked.
    pub q_fixed: f64,
    /// Distance std in meters when the reported one is not used.
    pub sigma_const: f64,
    /// Resample when ESS < resample_ratio * particles.
    pub resample_ratio: f64,
    /// Post-resampling jitter std of positions (m) and velocities (m/s).
    pub jitter_pos: f64,
    pub jitter_vel: f64,
    /// Share of initial particles placed around the first measured distances.
    pub ring_fraction: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let p = FilterParams::default();
        Self {
            r_init: p.r_init,
            r_track: p.r_track,
            r_u: p.r_u,
            sigma_a: p.kinematics.sigma_a,
            sigma_u: p.amplitude_walk.sigma_u,
            gamma: p.amplitude.gamma,
            u_max: p.amplitude.u_max,
            q_fixed: p.q_fixed,
            sigma_const: p.sigma_const,
            resample_ratio: p.resample_ratio,
            jitter_pos: p.jitter_pos,
            jitter_vel: p.jitter_vel,
            ring_fraction: p.ring_fraction,
        }
    }
}

/// A complete Monte-Carlo study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub runs: usize,
    /// Master seed; every run derives its own streams from it.
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    pub workers: usize,
    pub output_dir: PathBuf,
    pub algorithms: Vec<Algorithm>,
    pub filter: FilterConfig,
    pub scenario: ScenarioConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: 500,
            seed: 1,
            workers: 0,
            output_dir: PathBuf::from("results"),
            algorithms: Variant::ALL.into_iter().map(Algorithm::Named).collect(),
            filter: FilterConfig::default(),
            scenario: ScenarioConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be positive".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("no algorithm selected".into()));
        }
        let mut labels: Vec<String> = self.algorithms.iter().map(Algorithm::label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.algorithms.len() {
            return Err(Error::InvalidParameter("algorithm labels must be unique".into()));
        }
        for a in &self.algorithms {
            self.filter_params(a)?.validate()?;
        }
        Ok(())
    }

    /// Filter parameters of one variant. The inference uses the scenario's
    /// NLOS parameters and time step.
    pub fn filter_params(&self, algorithm: &Algorithm) -> Result<FilterParams> {
        let f = &self.filter;
        Ok(FilterParams {
            kinematics: KinematicModel::new(self.scenario.dt, f.sigma_a)?,
            amplitude_walk: AmplitudeWalk::new(f.sigma_u, f.u_max)?,
            los_grid: default_los_grid(),
            nlos: self.scenario.nlos,
            amplitude: AmplitudeParams {
                gamma: f.gamma,
                u_max: f.u_max,
            },
            features: algorithm.features(),
            r_init: f.r_init,
            r_track: f.r_track,
            r_u: f.r_u,
            q_fixed: f.q_fixed,
            sigma_const: f.sigma_const,
            resample_ratio: f.resample_ratio,
            jitter_pos: f.jitter_pos,
            jitter_vel: f.jitter_vel,
            ring_fraction: f.ring_fraction,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file, or the config recorded in a results manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: toml::Table = toml::from_str(&text)?;
        if value.contains_key("build") && value.contains_key("config") {
            Ok(toml::from_str::<Manifest>(&text)?.config)
        } else {
            Self::from_toml(&text)
        }
    }
}

/// Provenance of an output directory: the build and the resolved config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub build: BuildInfo,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub version: String,
    pub git_describe: String,
}

impl BuildInfo {
    pub fn current() -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            git_describe: env!("APDA_GIT_DESCRIBE").to_string(),
        }
    }
}
