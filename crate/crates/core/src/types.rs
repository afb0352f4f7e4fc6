//! Value types shared by the models, the filter and the simulator.

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2-D position or velocity, in SI units.
pub type Vec2 = Vector2<f64>;

/// Position and velocity of the mobile agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub p: Vec2,
    pub v: Vec2,
}

impl AgentState {
    pub fn new(p: Vec2, v: Vec2) -> Self {
        Self { p, v }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }
}

/// A fixed receiver. Ids run contiguously from 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: usize,
    pub position: Vec2,
}

impl Anchor {
    pub fn new(id: usize, x: f64, y: f64) -> Self {
        Self {
            id,
            position: Vec2::new(x, y),
        }
    }
}

/// Checks that anchor ids are exactly `1..=J` in order.
pub fn validate_anchors(anchors: &[Anchor]) -> Result<()> {
    if anchors.is_empty() {
        return Err(Error::Validation("at least one anchor is required".into()));
    }
    for (k, a) in anchors.iter().enumerate() {
        if a.id != k + 1 {
            return Err(Error::Validation(format!(
                "anchor ids must be contiguous from 1, found id {} at position {}",
                a.id,
                k + 1
            )));
        }
        if !a.position.iter().all(|c| c.is_finite()) {
            return Err(Error::Validation(format!("anchor {} has a non-finite position", a.id)));
        }
    }
    Ok(())
}

/// Euclidean distance between the agent position and an anchor.
pub fn los_distance(p: &Vec2, anchor: &Anchor) -> f64 {
    (p - anchor.position).norm()
}

/// One estimated multipath component: distance, normalized amplitude and distance std.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub d_hat: f64,
    pub u_hat: f64,
    pub sigma_d_hat: f64,
}

impl Measurement {
    pub fn new(d_hat: f64, u_hat: f64, sigma_d_hat: f64) -> Self {
        Self {
            d_hat,
            u_hat,
            sigma_d_hat,
        }
    }
}

/// All measurements of one anchor at one time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub anchor_id: usize,
    pub time_index: usize,
    pub measurements: Vec<Measurement>,
}

impl Scan {
    pub fn new(anchor_id: usize, time_index: usize, measurements: Vec<Measurement>) -> Self {
        Self {
            anchor_id,
            time_index,
            measurements,
        }
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }
}

/// Parameters of the non-line-of-sight distance density: a mixture of a
/// double-exponential multipath term and a uniform false-alarm term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlosParams {
    /// Mixture weight of the multipath term.
    pub p_mp: f64,
    /// Rise distance of the double exponential, meters.
    pub gamma_r: f64,
    /// Fall distance of the double exponential, meters.
    pub gamma_f: f64,
    /// Offset beyond the LOS distance where multipath starts, meters.
    pub bias_b: f64,
    /// Maximum observable distance, meters.
    pub d_max: f64,
}

impl Default for NlosParams {
    fn default() -> Self {
        Self {
            p_mp: 0.9,
            gamma_r: 1.5,
            gamma_f: 6.0,
            bias_b: 0.2,
            d_max: 50.0,
        }
    }
}

impl NlosParams {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.p_mp)
            && self.gamma_r > 0.0
            && self.gamma_f > 0.0
            && self.d_max > 0.0
            && self.bias_b >= 0.0
            && self.gamma_r.is_finite()
            && self.gamma_f.is_finite()
            && self.d_max.is_finite()
            && self.bias_b.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid NLOS parameters {self:?}")))
        }
    }
}

/// Detection threshold and upper bound of the normalized amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeParams {
    pub gamma: f64,
    pub u_max: f64,
}

impl Default for AmplitudeParams {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            u_max: 40.0,
        }
    }
}

impl AmplitudeParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma >= 0.0 && self.u_max > self.gamma && self.u_max.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "amplitude parameters need u_max > gamma >= 0, got {self:?}"
            )))
        }
    }
}

/// Discrete support of the LOS existence probability together with its
/// Markov transition matrix. Entry `(i, k)` is `P(q_n = w_i | q_{n-1} = w_k)`,
/// so every column sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct LosGrid {
    values: Vec<f64>,
    transition: DMatrix<f64>,
}

impl LosGrid {
    pub fn new(values: Vec<f64>, transition: DMatrix<f64>) -> Result<Self> {
        let q = values.len();
        if q == 0 {
            return Err(Error::Validation("LOS grid needs at least one value".into()));
        }
        if transition.nrows() != q || transition.ncols() != q {
            return Err(Error::Validation(format!(
                "transition matrix is {}x{}, expected {q}x{q}",
                transition.nrows(),
                transition.ncols()
            )));
        }
        if values.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::Validation("LOS grid values must lie in (0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("LOS grid values must be strictly increasing".into()));
        }
        for (k, col) in transition.column_iter().enumerate() {
            if col.iter().any(|&x| x < 0.0) {
                return Err(Error::Validation(format!("column {k} has a negative entry")));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("column {k} sums to {s}, not 1")));
            }
        }
        Ok(Self { values, transition })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
