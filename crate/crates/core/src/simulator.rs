//! Measurement-level simulation: a smooth ground-truth trajectory and, per
//! time step and anchor, a shuffled list of LOS and NLOS measurements.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::crlb::CrlbContext;
use crate::error::{Error, Result};
use crate::types::{los_distance, validate_anchors, AgentState, Anchor, Measurement, NlosParams, Scan, Vec2};

/// Tolerance used when comparing sample times against interval bounds.
const TIME_EPS: f64 = 1e-9;

/// Whether the path-loss exponent applies to the amplitude or to the power.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossDomain {
    Amplitude,
    Power,
}

/// A time interval `[start, end)` during which the LOS to some anchors is blocked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlosWindow {
    pub anchors: Vec<usize>,
    pub start: f64,
    pub end: f64,
}

impl OlosWindow {
    pub fn contains(&self, anchor_id: usize, t: f64) -> bool {
        self.anchors.contains(&anchor_id) && in_window(t, self.start, self.end)
    }
}

/// `t in [start, end)` up to floating-point noise in `t`.
pub fn in_window(t: f64, start: f64, end: f64) -> bool {
    t >= start - TIME_EPS && t < end - TIME_EPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub anchors: Vec<Anchor>,
    /// Intermediate path points, starting with the distant start point. The
    /// path always ends at the anchor centroid.
    pub waypoints: Vec<Vec2>,
    pub duration: f64,
    pub dt: f64,
    pub speed_nominal: f64,
    /// Relative amplitude of the sinusoidal speed modulation.
    pub speed_variation: f64,
    pub snr_ref_db: f64,
    pub pathloss_exponent: f64,
    pub pathloss_domain: PathlossDomain,
    /// Mean number of NLOS measurements per scan.
    pub clutter_rate: f64,
    pub nlos: NlosParams,
    /// Effective bandwidth in Hz.
    pub effective_bandwidth: f64,
    pub olos_windows: Vec<OlosWindow>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            anchors: vec![
                Anchor::new(1, -2.0, -1.0),
                Anchor::new(2, 2.0, -1.0),
                Anchor::new(3, 0.0, 2.0),
            ],
            waypoints: vec![
                Vec2::new(-22.0, 10.0),
                Vec2::new(-15.0, 14.0),
                Vec2::new(-8.0, 9.0),
                Vec2::new(-9.0, 2.0),
                Vec2::new(-4.0, -4.0),
            ],
            duration: 20.0,
            dt: 0.05,
            speed_nominal: 1.4,
            speed_variation: 0.15,
            snr_ref_db: 30.0,
            pathloss_exponent: 0.4,
            pathloss_domain: PathlossDomain::Amplitude,
            clutter_rate: 10.0,
            nlos: NlosParams::default(),
            effective_bandwidth: 1e8,
            olos_windows: vec![
                OlosWindow {
                    anchors: vec![1],
                    start: 6.0,
                    end: 8.0,
                },
                OlosWindow {
                    anchors: vec![1, 2, 3],
                    start: 14.2,
                    end: 16.2,
                },
            ],
        }
    }
}

impl ScenarioConfig {
    pub fn num_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Time of step `n` (1-based); the first scan is taken at `t = 0`.
    pub fn time_of(&self, n: usize) -> f64 {
        (n - 1) as f64 * self.dt
    }

    pub fn centroid(&self) -> Vec2 {
        let s: Vec2 = self.anchors.iter().map(|a| a.position).sum();
        s / self.anchors.len() as f64
    }

    pub fn crlb(&self) -> Result<CrlbContext> {
        CrlbContext::new(self.effective_bandwidth)
    }

    pub fn is_obstructed(&self, anchor_id: usize, t: f64) -> bool {
        self.olos_windows.iter().any(|w| w.contains(anchor_id, t))
    }

    pub fn validate(&self) -> Result<()> {
        validate_anchors(&self.anchors)?;
        self.nlos.validate()?;
        let steps = self.duration / self.dt;
        if !(self.dt > 0.0 && self.duration > 0.0) || (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "duration {} must be a positive integer multiple of dt {}",
                self.duration, self.dt
            )));
        }
        if !(self.speed_nominal > 0.0)
            || !(0.0..1.0).contains(&self.speed_variation)
            || !(self.clutter_rate >= 0.0)
            || !(self.effective_bandwidth > 0.0)
            || !(self.pathloss_exponent >= 0.0)
        {
            return Err(Error::InvalidParameter("scenario rates and scales must be positive".into()));
        }
        if self.waypoints.is_empty() {
            return Err(Error::InvalidParameter("at least one waypoint is required".into()));
        }
        for w in &self.olos_windows {
            if w.end < w.start || w.anchors.iter().any(|&a| a == 0 || a > self.anchors.len()) {
                return Err(Error::InvalidParameter(format!("invalid OLOS window {w:?}")));
            }
        }
        Ok(())
    }
}

/// Centripetal Catmull-Rom segment between `p1` and `p2`.
fn catmull_rom(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2, s: f64) -> Vec2 {
    let knot = |a: Vec2, b: Vec2| (b - a).norm().sqrt().max(1e-9);
    let t0 = 0.0;
    let t1 = t0 + knot(p0, p1);
    let t2 = t1 + knot(p1, p2);
    let t3 = t2 + knot(p2, p3);
    let t = t1 + s * (t2 - t1);
    let lerp = |a: Vec2, b: Vec2, ta: f64, tb: f64| a * ((tb - t) / (tb - ta)) + b * ((t - ta) / (tb - ta));
    let a1 = lerp(p0, p1, t0, t1);
    let a2 = lerp(p1, p2, t1, t2);
    let a3 = lerp(p2, p3, t2, t3);
    let b1 = lerp(a1, a2, t0, t2);
    let b2 = lerp(a2, a3, t1, t3);
    lerp(b1, b2, t1, t2)
}

/// Dense polyline of the spline through `points`.
fn spline_polyline(points: &[Vec2], per_segment: usize) -> Vec<Vec2> {
    if points.len() == 1 {
        return points.to_vec();
    }
    let n = points.len();
    let get = |i: isize| -> Vec2 {
        if i < 0 {
            points[0] * 2.0 - points[1]
        } else if i as usize >= n {
            points[n - 1] * 2.0 - points[n - 2]
        } else {
            points[i as usize]
        }
    };
    let mut out = Vec::with_capacity((n - 1) * per_segment + 1);
    for seg in 0..n - 1 {
        let i = seg as isize;
        let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
        for k in 0..per_segment {
            out.push(catmull_rom(p0, p1, p2, p3, k as f64 / per_segment as f64));
        }
    }
    out.push(points[n - 1]);
    out
}

/// Piecewise-linear arc-length parameterization of a polyline.
struct ArcLength {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl ArcLength {
    fn new(points: Vec<Vec2>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut s = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            s += (w[1] - w[0]).norm();
            cumulative.push(s);
        }
        Self { points, cumulative }
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.total());
        let k = self.cumulative.partition_point(|&c| c < s).max(1).min(self.points.len() - 1);
        let (c0, c1) = (self.cumulative[k - 1], self.cumulative[k]);
        let f = if c1 > c0 { (s - c0) / (c1 - c0) } else { 0.0 };
        self.points[k - 1] * (1.0 - f) + self.points[k] * f
    }
}

/// Ground-truth trajectory of `N = duration / dt` states.
///
/// The agent follows a spline through the waypoints that ends at the anchor
/// centroid. Its speed oscillates sinusoidally around `speed_nominal` with
/// two full periods over the run, so the covered distance is exactly
/// `speed_nominal * duration` and the run ends at the centroid. Velocities
/// are finite differences of consecutive positions.
pub fn gen_trajectory(config: &ScenarioConfig) -> Result<Vec<AgentState>> {
    config.validate()?;
    let mut pts = config.waypoints.clone();
    pts.push(config.centroid());
    let path = ArcLength::new(spline_polyline(&pts, 400));
    let travelled = config.speed_nominal * config.duration;
    if path.total() < travelled {
        return Err(Error::InvalidParameter(format!(
            "waypoint path is {:.2} m long but the agent travels {travelled:.2} m",
            path.total()
        )));
    }
    let offset = path.total() - travelled;
    let omega = 2.0 * std::f64::consts::TAU / config.duration;
    let distance = |t: f64| {
        config.speed_nominal * (t + config.speed_variation * (1.0 - (omega * t).cos()) / omega)
    };
    let n_steps = config.num_steps();
    // one extra sample at t = duration so the last velocity is a forward difference
    let positions: Vec<Vec2> = (1..=n_steps + 1)
        .map(|n| path.at(offset + distance(config.time_of(n)).min(travelled)))
        .collect();
    Ok((0..n_steps)
        .map(|i| {
            let v = (positions[i + 1] - positions[i]) / config.dt;
            AgentState::new(positions[i], v)
        })
        .collect())
}

/// Mean LOS amplitude at distance `d` (clamped at 0.1 m).
pub fn los_amplitude(d: f64, config: &ScenarioConfig) -> f64 {
    let d = d.max(0.1);
    let u_ref = 10f64.powf(config.snr_ref_db / 20.0);
    let exponent = match config.pathloss_domain {
        PathlossDomain::Amplitude => config.pathloss_exponent,
        PathlossDomain::Power => 0.5 * config.pathloss_exponent,
    };
    u_ref * d.powf(-exponent)
}

/// Rician amplitude with unit spread: `|u + n|` for complex standard noise.
pub fn sample_rice<R: Rng + ?Sized>(u: f64, rng: &mut R) -> f64 {
    let re = u + rng.sample::<f64, _>(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    re.hypot(im)
}

pub fn sample_rayleigh<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    sample_rice(0.0, rng)
}

/// Excess distance of a multipath component beyond `d_LOS + B`. The
/// double-exponential density is the law of the sum of two independent
/// exponentials with means `gamma_f` and `gamma_f * gamma_r / (gamma_f + gamma_r)`.
pub fn sample_mp_offset<R: Rng + ?Sized>(params: &NlosParams, rng: &mut R) -> f64 {
    let fall = Exp::new(1.0 / params.gamma_f).expect("gamma_f > 0");
    let fast = Exp::new(1.0 / params.gamma_f + 1.0 / params.gamma_r).expect("rates > 0");
    fall.sample(rng) + fast.sample(rng)
}

/// A scan together with the ground-truth origin of each measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct SimScan {
    pub scan: Scan,
    pub los: Vec<bool>,
}

/// Generates one anchor's measurements at step `n`.
///
/// Measurements whose distance falls outside `[0, d_max]` are not observable
/// and are dropped.
pub fn gen_scan<R: Rng + ?Sized>(
    x_true: &AgentState,
    anchor: &Anchor,
    n: usize,
    config: &ScenarioConfig,
    crlb: &CrlbContext,
    rng: &mut R,
) -> Result<SimScan> {
    let d_los = los_distance(&x_true.p, anchor);
    let d_max = config.nlos.d_max;
    let mut items: Vec<(Measurement, bool)> = Vec::new();

    if !config.is_obstructed(anchor.id, config.time_of(n)) {
        let u_hat = sample_rice(los_amplitude(d_los, config), rng);
        let sigma = crlb.sigma_from_amplitude(u_hat)?;
        let d_hat = d_los + sigma * rng.sample::<f64, _>(StandardNormal);
        if (0.0..=d_max).contains(&d_hat) {
            items.push((Measurement::new(d_hat, u_hat, sigma), true));
        }
    }

    let count = if config.clutter_rate > 0.0 {
        Poisson::new(config.clutter_rate)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    for _ in 0..count {
        let d_hat = if rng.random::<f64>() < config.nlos.p_mp {
            d_los + config.nlos.bias_b + sample_mp_offset(&config.nlos, rng)
        } else {
            d_max * rng.random::<f64>()
        };
        let u_hat = sample_rayleigh(rng);
        let sigma = crlb.sigma_from_amplitude(u_hat)?;
        if (0.0..=d_max).contains(&d_hat) {
            items.push((Measurement::new(d_hat, u_hat, sigma), false));
        }
    }
    items.shuffle(rng);
    let (measurements, los) = items.into_iter().unzip();
    Ok(SimScan {
        scan: Scan::new(anchor.id, n, measurements),
        los,
    })
}

/// One simulated realization: the trajectory and, for every step, one scan
/// per anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct SimRun {
    pub trajectory: Vec<AgentState>,
    pub scans: Vec<Vec<SimScan>>,
}

pub fn simulate<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<SimRun> {
    let trajectory = gen_trajectory(config)?;
    let crlb = config.crlb()?;
    let scans = trajectory
        .iter()
        .enumerate()
        .map(|(i, x)| {
            config
                .anchors
                .iter()
                .map(|a| gen_scan(x, a, i + 1, config, &crlb, rng))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimRun { trajectory, scans })
}
