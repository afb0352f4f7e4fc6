//! Particle-based sum-product filter for the agent state, the per-anchor
//! normalized amplitudes and the per-anchor LOS probabilities.
//!
//! The agent state is represented by weighted particles. Every anchor keeps
//! its own weighted amplitude particles and a PMF over the LOS-probability
//! grid. The association variable is summed out exactly for every particle.
//! Because the marginalized factor is linear in `q` and separates into an
//! `x`-dependent and a `u`-dependent part per measurement, the amplitude
//! integral is evaluated once per scan, which keeps the cost at
//! `O((R_x + R_u) * M)` per anchor.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihoods::MeasurementModel;
use crate::motion::{default_los_grid, propagate_q_pmf, state_vector, AmplitudeWalk, KinematicModel};
use crate::resample::{effective_sample_size, systematic_indices};
use crate::special::{log_sum_exp, normalize_log_weights};
use crate::types::{
    los_distance, validate_anchors, AgentState, AmplitudeParams, Anchor, LosGrid, NlosParams, Scan, Vec2,
};

/// Relative floor applied to every anchor message before the product across
/// anchors.
pub const MESSAGE_FLOOR: f64 = 1e-300;

/// Feature switches of the ablation ladder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterFeatures {
    pub track_q: bool,
    pub use_amplitude: bool,
    pub nonuniform_nlos: bool,
    pub crlb_sigma: bool,
}

/// Named algorithm variants. Each adds one feature to the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    AL1,
    AL2,
    AL3,
    AL4,
    AL5,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::AL1, Variant::AL2, Variant::AL3, Variant::AL4, Variant::AL5];

    pub fn features(self) -> FilterFeatures {
        let level = self as u8;
        FilterFeatures {
            track_q: level >= 1,
            use_amplitude: level >= 2,
            nonuniform_nlos: level >= 3,
            crlb_sigma: level >= 4,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm variant '{s}'")))
    }
}

/// Everything the filter needs besides the anchors.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterParams {
    pub kinematics: KinematicModel,
    pub amplitude_walk: AmplitudeWalk,
    pub los_grid: LosGrid,
    pub nlos: NlosParams,
    pub amplitude: AmplitudeParams,
    pub features: FilterFeatures,
    pub r_init: usize,
    pub r_track: usize,
    pub r_u: usize,
    /// LOS probability used when `track_q` is off.
    pub q_fixed: f64,
    /// Distance std used when `crlb_sigma` is off.
    pub sigma_const: f64,
    /// Resample when the ESS drops below this fraction of the particle count.
    pub resample_ratio: f64,
    /// Std of the Gaussian jitter added to resampled positions (m) and
    /// velocities (m/s). Zero disables it.
    pub jitter_pos: f64,
    pub jitter_vel: f64,
    /// Share of the initial particles drawn around the measured distances of
    /// the first scans instead of from the disc prior (see [`ring_proposal`]).
    pub ring_fraction: f64,
}

impl Default for FilterParams {
    /// The full variant with the evaluation settings: 50 ms steps,
    /// 0.3 m/s² acceleration noise, 10^4 initial and 10^3 tracking particles.
    fn default() -> Self {
        Self {
            kinematics: KinematicModel::new(0.05, 0.3).expect("valid kinematics"),
            amplitude_walk: AmplitudeWalk::new(0.2, AmplitudeParams::default().u_max).expect("valid walk"),
            los_grid: default_los_grid(),
            nlos: NlosParams::default(),
            amplitude: AmplitudeParams::default(),
            features: Variant::AL5.features(),
            r_init: 10_000,
            r_track: 1000,
            r_u: 1000,
            q_fixed: 0.999,
            sigma_const: 0.1,
            resample_ratio: 0.5,
            jitter_pos: 0.02,
            jitter_vel: 0.05,
            ring_fraction: 0.8,
        }
    }
}

impl FilterParams {
    /// The measurement model as seen by the inference, with disabled
    /// features replaced by their fallbacks.
    pub fn measurement_model(&self) -> MeasurementModel {
        let mut nlos = self.nlos;
        if !self.features.nonuniform_nlos {
            nlos.p_mp = 0.0;
        }
        MeasurementModel {
            nlos,
            amplitude: self.amplitude,
            use_amplitude: self.features.use_amplitude,
            sigma_override: (!self.features.crlb_sigma).then_some(self.sigma_const),
        }
    }

    pub fn los_prior(&self) -> LosPrior<'_> {
        if self.features.track_q {
            LosPrior::Tracked(&self.los_grid)
        } else {
            LosPrior::Fixed(self.q_fixed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.nlos.validate()?;
        self.amplitude.validate()?;
        if self.r_init == 0 || self.r_track == 0 || self.r_u == 0 {
            return Err(Error::InvalidParameter("particle counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.q_fixed) {
            return Err(Error::InvalidParameter(format!("q_fixed = {} is not a probability", self.q_fixed)));
        }
        if !(self.sigma_const > 0.0) {
            return Err(Error::InvalidParameter("sigma_const must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_ratio) {
            return Err(Error::InvalidParameter("resample_ratio must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.ring_fraction) {
            return Err(Error::InvalidParameter("ring_fraction must lie in [0, 1)".into()));
        }
        if !(self.jitter_pos >= 0.0 && self.jitter_vel >= 0.0) || !self.jitter_pos.is_finite() || !self.jitter_vel.is_finite() {
            return Err(Error::InvalidParameter("jitter stds must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Covariance of the post-resampling jitter, or `None` when it is off.
    pub fn jitter_covariance(&self) -> Option<Matrix4<f64>> {
        if self.jitter_pos == 0.0 && self.jitter_vel == 0.0 {
            return None;
        }
        Some(Matrix4::from_diagonal(&Vector4::new(
            self.jitter_pos.powi(2),
            self.jitter_pos.powi(2),
            self.jitter_vel.powi(2),
            self.jitter_vel.powi(2),
        )))
    }
}

/// How the LOS probability enters the association prior.
#[derive(Clone, Copy, Debug)]
pub enum LosPrior<'a> {
    /// Use the per-anchor PMF over the grid.
    Tracked(&'a LosGrid),
    /// Hold `q` at a constant.
    Fixed(f64),
}

/// Weighted amplitude particles of one anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeBelief {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Joint filter state.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief {
    pub states: Vec<AgentState>,
    pub weights: Vec<f64>,
    pub amplitudes: Vec<AmplitudeBelief>,
    pub q_pmf: Vec<Vec<f64>>,
}

impl Belief {
    pub fn num_anchors(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let check = |w: &[f64], what: &str| -> Result<()> {
            let s: f64 = w.iter().sum();
            if w.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!("{what} weights not normalized (sum {s})")));
            }
            Ok(())
        };
        if self.states.len() != self.weights.len() {
            return Err(Error::Validation("state/weight length mismatch".into()));
        }
        check(&self.weights, "state")?;
        for (j, a) in self.amplitudes.iter().enumerate() {
            if a.values.len() != a.weights.len() {
                return Err(Error::Validation(format!("anchor {}: amplitude length mismatch", j + 1)));
            }
            check(&a.weights, "amplitude")?;
        }
        for q in &self.q_pmf {
            check(q, "LOS-probability")?;
        }
        Ok(())
    }
}

/// MMSE estimates of all tracked quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub state: AgentState,
    pub amplitudes: Vec<f64>,
    pub los_probs: Vec<f64>,
}

/// Draws a point uniformly from the union-of-discs prior: an anchor is
/// picked uniformly, then a uniform point in the disc of radius `d_max`.
fn sample_disc<R: Rng + ?Sized>(anchors: &[Anchor], d_max: f64, rng: &mut R) -> Vec2 {
    let a = &anchors[rng.random_range(0..anchors.len())];
    let r = d_max * rng.random::<f64>().sqrt();
    let phi = std::f64::consts::TAU * rng.random::<f64>();
    a.position + Vec2::new(r * phi.cos(), r * phi.sin())
}

/// Initial belief: positions uniform on discs of radius `d_max` around the
/// anchors, zero velocity, amplitudes uniform on `[0, u_max]`, and all LOS
/// PMFs concentrated on the largest grid value.
pub fn init_belief<R: Rng + ?Sized>(
    anchors: &[Anchor],
    d_max: f64,
    amp: &AmplitudeParams,
    grid: &LosGrid,
    r_init: usize,
    r_u: usize,
    rng: &mut R,
) -> Result<Belief> {
    validate_anchors(anchors)?;
    if r_init == 0 || r_u == 0 {
        return Err(Error::InvalidParameter("particle counts must be positive".into()));
    }
    let states = (0..r_init)
        .map(|_| AgentState::new(sample_disc(anchors, d_max, rng), Vec2::zeros()))
        .collect();
    let amplitudes = anchors
        .iter()
        .map(|_| AmplitudeBelief {
            values: (0..r_u).map(|_| amp.u_max * rng.random::<f64>()).collect(),
            weights: vec![1.0 / r_u as f64; r_u],
        })
        .collect();
    let mut q0 = vec![0.0; grid.len()];
    q0[grid.len() - 1] = 1.0;
    Ok(Belief {
        states,
        weights: vec![1.0 / r_init as f64; r_init],
        amplitudes,
        q_pmf: vec![q0; anchors.len()],
    })
}

fn disc_prior_density(p: &Vec2, anchors: &[Anchor], d_max: f64) -> f64 {
    let inside = anchors.iter().filter(|a| (p - a.position).norm() <= d_max).count();
    inside as f64 / (anchors.len() as f64 * std::f64::consts::PI * d_max * d_max)
}

/// Redraws the state particles from a defensive mixture: with probability
/// `1 - fraction` from the disc prior, otherwise from a ring around a random
/// (anchor, measurement) pair of `scans` whose radius is the measured
/// distance blurred by its std (folded at zero). Weights are set to
/// prior / proposal, so a subsequent update targets the same posterior as
/// with prior samples, but particles now exist close to every range circle.
/// Velocities are set to zero. Does nothing if every scan is empty.
pub fn ring_proposal<R: Rng + ?Sized>(
    belief: &mut Belief,
    scans: &[Scan],
    anchors: &[Anchor],
    model: &MeasurementModel,
    fraction: f64,
    rng: &mut R,
) -> Result<()> {
    let rings: Vec<(Vec2, f64, f64)> = scans
        .iter()
        .zip(anchors)
        .flat_map(|(s, a)| s.measurements.iter().map(move |m| (a.position, m.d_hat, model.sigma(m))))
        .collect();
    if rings.is_empty() || fraction == 0.0 {
        return Ok(());
    }
    for &(_, _, s) in &rings {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("distance std must be positive, got {s}")));
        }
    }
    let d_max = model.nlos.d_max;
    let ring_density = |p: &Vec2| -> f64 {
        rings
            .iter()
            .map(|(c, d, s)| {
                let r = (p - c).norm();
                let g = |x: f64| (-0.5 * ((x - d) / s).powi(2)).exp();
                (g(r) + g(-r)) / (s * (std::f64::consts::TAU).sqrt() * std::f64::consts::TAU * r)
            })
            .sum::<f64>()
            / rings.len() as f64
    };
    let n = belief.states.len();
    let mut ln_w = Vec::with_capacity(n);
    for x in belief.states.iter_mut() {
        let p = if rng.random::<f64>() < fraction {
            let (c, d, s) = rings[rng.random_range(0..rings.len())];
            let r = (d + s * rng.sample::<f64, _>(StandardNormal)).abs();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            c + Vec2::new(r * phi.cos(), r * phi.sin())
        } else {
            sample_disc(anchors, d_max, rng)
        };
        let prior = disc_prior_density(&p, anchors, d_max);
        let proposal = (1.0 - fraction) * prior + fraction * ring_density(&p);
        ln_w.push(prior.ln() - proposal.ln());
        *x = AgentState::new(p, Vec2::zeros());
    }
    if !normalize_log_weights(&ln_w, &mut belief.weights) {
        return Err(Error::Validation("ring proposal produced no valid particle".into()));
    }
    Ok(())
}

/// Prediction messages for state, amplitudes and LOS probabilities.
/// Weights are left untouched.
pub fn predict<R: Rng + ?Sized>(
    belief: &mut Belief,
    kin: &KinematicModel,
    walk: &AmplitudeWalk,
    grid: Option<&LosGrid>,
    rng: &mut R,
) -> Result<()> {
    for x in belief.states.iter_mut() {
        *x = kin.sample_transition(x, rng);
    }
    for a in belief.amplitudes.iter_mut() {
        for u in a.values.iter_mut() {
            *u = walk.sample_transition(*u, rng);
        }
    }
    if let Some(grid) = grid {
        for q in belief.q_pmf.iter_mut() {
            *q = propagate_q_pmf(q, grid)?;
        }
    }
    Ok(())
}

/// Log-domain intermediate quantities of one anchor's measurement update.
struct AnchorTerms {
    m: usize,
    /// `ln xi` per state particle.
    ln_xi: Vec<f64>,
    /// `ln prod_m f_NL(d_m)` per state particle.
    ln_nl: Vec<f64>,
    /// `ln f_L(d_m) + ln prod_{m' != m} f_NL(d_m')`, row-major `[particle][m]`.
    ln_los: Vec<f64>,
    /// `ln P_D(u_k) + ln(f_L(u_m | u_k) / f_NL(u_m))`, row-major `[k][m]`.
    ln_amp: Vec<f64>,
    /// `ln P_D(u_k)`.
    ln_pd: Vec<f64>,
    /// Amplitude-marginalized `ln E_u[P_D f_L/f_NL]` per measurement.
    ln_amp_mean: Vec<f64>,
    /// `E_u[P_D]`.
    pd_mean: f64,
    /// `E_q[q]` under the predicted LOS-probability message.
    q_mean: f64,
}

/// `ln(1 - x)` for a probability `x`; rounding may push products of
/// probabilities a few ulps past one.
fn ln_1m(x: f64) -> f64 {
    (-x.min(1.0)).ln_1p()
}

fn anchor_terms(
    belief: &Belief,
    j: usize,
    scan: &Scan,
    anchor: &Anchor,
    model: &MeasurementModel,
    los: LosPrior<'_>,
) -> Result<AnchorTerms> {
    if scan.anchor_id != anchor.id {
        return Err(Error::Validation(format!(
            "scan belongs to anchor {}, not anchor {}",
            scan.anchor_id, anchor.id
        )));
    }
    if j >= belief.num_anchors() {
        return Err(Error::Validation(format!("belief has no slot for anchor {}", anchor.id)));
    }
    for meas in &scan.measurements {
        model.check(meas)?;
    }
    let m = scan.len();
    let amps = &belief.amplitudes[j];
    let q_mean = match los {
        LosPrior::Tracked(grid) => grid.values().iter().zip(&belief.q_pmf[j]).map(|(w, p)| w * p).sum(),
        LosPrior::Fixed(q) => q,
    };

    // amplitude side, independent of the agent state
    let ln_pd: Vec<f64> = amps.values.iter().map(|&u| model.detection_prob(u).ln()).collect();
    let mut ln_amp = Vec::with_capacity(amps.values.len() * m);
    for (&u, &lpd) in amps.values.iter().zip(&ln_pd) {
        for meas in &scan.measurements {
            ln_amp.push(lpd + model.ln_amplitude_ratio(meas.u_hat, u));
        }
    }
    let ln_w_u: Vec<f64> = amps.weights.iter().map(|w| w.ln()).collect();
    let ln_amp_mean: Vec<f64> = (0..m)
        .map(|mi| log_sum_exp(ln_w_u.iter().enumerate().map(|(k, lw)| lw + ln_amp[k * m + mi])))
        .collect();
    let pd_mean: f64 = amps.weights.iter().zip(&ln_pd).map(|(w, l)| w * l.exp()).sum();

    // state side
    let ln_sigma: Vec<(f64, f64)> = scan
        .measurements
        .iter()
        .map(|z| {
            let s = model.sigma(z);
            (1.0 / s, s.ln())
        })
        .collect();
    let ln_miss = ln_1m(q_mean * pd_mean);
    let ln_hit: Vec<f64> = ln_amp_mean
        .iter()
        .map(|a| q_mean.ln() - (m as f64).ln() + a)
        .collect();
    let n = belief.states.len();
    let mut ln_xi = Vec::with_capacity(n);
    let mut ln_nl = Vec::with_capacity(n);
    let mut ln_los = Vec::with_capacity(n * m);
    let mut ln_fnl = vec![0.0; m];
    let mut ln_fl = vec![0.0; m];
    let mut terms = Vec::with_capacity(m + 1);
    for x in &belief.states {
        let d_los = los_distance(&x.p, anchor);
        let mut finite_sum = 0.0;
        let mut zeros = 0usize;
        for (mi, meas) in scan.measurements.iter().enumerate() {
            let (inv_s, ln_s) = ln_sigma[mi];
            let z = (meas.d_hat - d_los) * inv_s;
            ln_fl[mi] = -0.5 * z * z - ln_s - 0.918_938_533_204_672_8;
            ln_fnl[mi] = model.ln_nlos_distance(meas.d_hat, d_los);
            if ln_fnl[mi] == f64::NEG_INFINITY {
                zeros += 1;
            } else {
                finite_sum += ln_fnl[mi];
            }
        }
        let all_nl = if zeros == 0 { finite_sum } else { f64::NEG_INFINITY };
        terms.clear();
        terms.push(ln_miss + all_nl);
        for mi in 0..m {
            let others = match (zeros, ln_fnl[mi] == f64::NEG_INFINITY) {
                (0, _) => finite_sum - ln_fnl[mi],
                (1, true) => finite_sum,
                _ => f64::NEG_INFINITY,
            };
            let l = ln_fl[mi] + others;
            ln_los.push(l);
            terms.push(ln_hit[mi] + l);
        }
        ln_nl.push(all_nl);
        ln_xi.push(log_sum_exp(terms.iter().copied()));
    }

    Ok(AnchorTerms {
        m,
        ln_xi,
        ln_nl,
        ln_los,
        ln_amp,
        ln_pd,
        ln_amp_mean,
        pd_mean,
        q_mean,
    })
}

/// The message from anchor `j`'s measurement factor to the agent state,
/// evaluated at every state particle. The overall scale is arbitrary.
pub fn anchor_update_message(
    belief: &Belief,
    j: usize,
    scan: &Scan,
    anchor: &Anchor,
    model: &MeasurementModel,
    los: LosPrior<'_>,
) -> Result<Vec<f64>> {
    let t = anchor_terms(belief, j, scan, anchor, model, los)?;
    Ok(t.ln_xi.iter().map(|l| l.exp()).collect())
}

/// Joint measurement update of all three belief families. Does not resample.
pub fn measurement_update(
    belief: &mut Belief,
    scans: &[Scan],
    anchors: &[Anchor],
    model: &MeasurementModel,
    los: LosPrior<'_>,
) -> Result<()> {
    if scans.len() != anchors.len() || belief.num_anchors() != anchors.len() {
        return Err(Error::Validation(format!(
            "expected one scan per anchor ({}), got {}",
            anchors.len(),
            scans.len()
        )));
    }
    let mut terms = scans
        .iter()
        .zip(anchors)
        .enumerate()
        .map(|(j, (s, a))| anchor_terms(belief, j, s, a, model, los))
        .collect::<Result<Vec<_>>>()?;

    let ln_floor = MESSAGE_FLOOR.ln();
    for t in terms.iter_mut() {
        let max = t.ln_xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::TrackLost);
        }
        for l in t.ln_xi.iter_mut() {
            *l = (*l - max).max(ln_floor);
        }
    }

    // posterior of the agent state: prediction times all anchor messages
    let ln_joint: Vec<f64> = belief
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| w.ln() + terms.iter().map(|t| t.ln_xi[i]).sum::<f64>())
        .collect();

    for (j, t) in terms.iter().enumerate() {
        // extrinsic message: everything but this anchor's own contribution
        let ln_chi: Vec<f64> = ln_joint.iter().zip(&t.ln_xi).map(|(a, b)| a - b).collect();
        let ln_s0 = log_sum_exp(ln_chi.iter().zip(&t.ln_nl).map(|(c, l)| c + l));
        let ln_sm: Vec<f64> = (0..t.m)
            .map(|mi| log_sum_exp(ln_chi.iter().enumerate().map(|(i, c)| c + t.ln_los[i * t.m + mi])))
            .collect();
        let ln_m = (t.m as f64).ln();

        let amps = &mut belief.amplitudes[j];
        let ln_post_u: Vec<f64> = amps
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let miss = ln_s0 + ln_1m(t.q_mean * t.ln_pd[k].exp());
                let hit = if t.m == 0 {
                    f64::NEG_INFINITY
                } else {
                    t.q_mean.ln() - ln_m + log_sum_exp((0..t.m).map(|mi| ln_sm[mi] + t.ln_amp[k * t.m + mi]))
                };
                w.ln() + log_sum_exp([miss, hit])
            })
            .collect();
        let mut new_w = vec![0.0; amps.weights.len()];
        if normalize_log_weights(&ln_post_u, &mut new_w) {
            amps.weights = new_w;
        }

        if let LosPrior::Tracked(grid) = los {
            let pmf = &mut belief.q_pmf[j];
            let ln_hit_mass = log_sum_exp((0..t.m).map(|mi| ln_sm[mi] + t.ln_amp_mean[mi]));
            let ln_post_q: Vec<f64> = grid
                .values()
                .iter()
                .zip(pmf.iter())
                .map(|(&q, &eta)| {
                    let miss = ln_s0 + ln_1m(q * t.pd_mean);
                    let hit = if t.m == 0 { f64::NEG_INFINITY } else { q.ln() - ln_m + ln_hit_mass };
                    eta.ln() + log_sum_exp([miss, hit])
                })
                .collect();
            let mut new_q = vec![0.0; pmf.len()];
            if normalize_log_weights(&ln_post_q, &mut new_q) {
                *pmf = new_q;
            }
        }
    }

    let mut new_w = vec![0.0; belief.weights.len()];
    if !normalize_log_weights(&ln_joint, &mut new_w) {
        return Err(Error::TrackLost);
    }
    belief.weights = new_w;
    Ok(())
}

/// Weighted means of state and amplitude particles and the mean of each
/// LOS-probability PMF.
pub fn estimate(belief: &Belief, grid: &LosGrid) -> Estimate {
    let mut p = Vec2::zeros();
    let mut v = Vec2::zeros();
    for (x, w) in belief.states.iter().zip(&belief.weights) {
        p += x.p * *w;
        v += x.v * *w;
    }
    let amplitudes = belief
        .amplitudes
        .iter()
        .map(|a| a.values.iter().zip(&a.weights).map(|(u, w)| u * w).sum())
        .collect();
    let los_probs = belief
        .q_pmf
        .iter()
        .map(|pmf| grid.values().iter().zip(pmf).map(|(q, p)| q * p).sum())
        .collect();
    Estimate {
        state: AgentState::new(p, v),
        amplitudes,
        los_probs,
    }
}

/// Systematic resampling of the state particles to `r_track` equally
/// weighted particles.
pub fn downselect<R: Rng + ?Sized>(belief: &mut Belief, r_track: usize, rng: &mut R) {
    let idx = systematic_indices(&belief.weights, r_track, rng);
    belief.states = idx.iter().map(|&i| belief.states[i]).collect();
    belief.weights = vec![1.0 / r_track as f64; r_track];
}

/// Weighted covariance of the stacked `[p, v]` state particles.
pub fn state_covariance(belief: &Belief) -> Matrix4<f64> {
    let mean: Vector4<f64> = belief
        .states
        .iter()
        .zip(&belief.weights)
        .map(|(x, w)| state_vector(x) * *w)
        .sum();
    belief
        .states
        .iter()
        .zip(&belief.weights)
        .map(|(x, w)| {
            let e = state_vector(x) - mean;
            e * e.transpose() * *w
        })
        .sum()
}

/// Moves every state particle by a draw from N(0, cov), cov diagonal.
fn jitter<R: Rng + ?Sized>(states: &mut [AgentState], cov: &Matrix4<f64>, rng: &mut R) {
    let factor = Matrix4::from_diagonal(&cov.diagonal().map(f64::sqrt));
    for x in states.iter_mut() {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let d = factor * z;
        x.p += Vec2::new(d[0], d[1]);
        x.v += Vec2::new(d[2], d[3]);
    }
}

/// Resamples state and amplitude particles whose ESS fell below
/// `ratio * count`. Resampled state particles are then jittered as
/// configured in `params`.
pub fn resample_if_degenerate<R: Rng + ?Sized>(belief: &mut Belief, params: &FilterParams, rng: &mut R) {
    let n = belief.states.len();
    if effective_sample_size(&belief.weights) < params.resample_ratio * n as f64 {
        let cov = params.jitter_covariance();
        downselect(belief, n, rng);
        if let Some(cov) = cov {
            jitter(&mut belief.states, &cov, rng);
        }
    }
    for a in belief.amplitudes.iter_mut() {
        let k = a.values.len();
        if effective_sample_size(&a.weights) < params.resample_ratio * k as f64 {
            let idx = systematic_indices(&a.weights, k, rng);
            a.values = idx.iter().map(|&i| a.values[i]).collect();
            a.weights = vec![1.0 / k as f64; k];
        }
    }
}

/// A running filter instance: belief plus the bookkeeping of the
/// initialization-to-tracking handover.
#[derive(Clone, Debug)]
pub struct Filter {
    params: FilterParams,
    anchors: Vec<Anchor>,
    model: MeasurementModel,
    belief: Belief,
    updates: usize,
}

impl Filter {
    pub fn new<R: Rng + ?Sized>(params: FilterParams, anchors: Vec<Anchor>, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let belief = init_belief(
            &anchors,
            params.nlos.d_max,
            &params.amplitude,
            &params.los_grid,
            params.r_init,
            params.r_u,
            rng,
        )?;
        Ok(Self {
            model: params.measurement_model(),
            params,
            anchors,
            belief,
            updates: 0,
        })
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn belief_mut(&mut self) -> &mut Belief {
        &mut self.belief
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn estimate(&self) -> Estimate {
        let mut e = estimate(&self.belief, &self.params.los_grid);
        if !self.params.features.track_q {
            e.los_probs.fill(self.params.q_fixed);
        }
        e
    }

    /// One time step: prediction, measurement update, estimation and
    /// resampling. The first successful update also shrinks the particle
    /// set from `r_init` to `r_track`.
    ///
    /// On [`Error::TrackLost`] the belief keeps its predicted state, so the
    /// caller may continue with the next scan.
    pub fn step<R: Rng + ?Sized>(&mut self, scans: &[Scan], rng: &mut R) -> Result<Estimate> {
        if self.updates == 0 && self.params.ring_fraction > 0.0 {
            if scans.len() != self.anchors.len() {
                return Err(Error::Validation(format!(
                    "expected one scan per anchor ({}), got {}",
                    self.anchors.len(),
                    scans.len()
                )));
            }
            ring_proposal(&mut self.belief, scans, &self.anchors, &self.model, self.params.ring_fraction, rng)?;
        }
        let grid = self.params.features.track_q.then_some(&self.params.los_grid);
        predict(
            &mut self.belief,
            &self.params.kinematics,
            &self.params.amplitude_walk,
            grid,
            rng,
        )?;
        measurement_update(
            &mut self.belief,
            scans,
            &self.anchors,
            &self.model,
            self.params.los_prior(),
        )?;
        let est = self.estimate();
        if self.updates == 0 && self.belief.states.len() != self.params.r_track {
            let cov = self.params.jitter_covariance();
            downselect(&mut self.belief, self.params.r_track, rng);
            if let Some(cov) = cov {
                jitter(&mut self.belief.states, &cov, rng);
            }
        } else {
            resample_if_degenerate(&mut self.belief, &self.params, rng);
        }
        self.updates += 1;
        Ok(est)
    }
}
