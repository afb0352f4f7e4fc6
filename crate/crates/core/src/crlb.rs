//! Range CRLB from the measured amplitude and the single-position
//! error bound (SP-CRLB) of range-only multilateration.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Anchor, Vec2};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrlbContext {
    /// Propagation speed, m/s.
    pub c: f64,
    /// Effective bandwidth, Hz.
    pub beta: f64,
}

impl CrlbContext {
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_speed(SPEED_OF_LIGHT, beta)
    }

    pub fn with_speed(c: f64, beta: f64) -> Result<Self> {
        if !(c > 0.0 && beta > 0.0 && c.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "speed and bandwidth must be positive, got c={c}, beta={beta}"
            )));
        }
        Ok(Self { c, beta })
    }

    /// Distance standard deviation `c / (sqrt(8) * pi * beta * u_hat)`.
    pub fn sigma_from_amplitude(&self, u_hat: f64) -> Result<f64> {
        if !(u_hat > 0.0) {
            return Err(Error::Domain(format!("amplitude must be positive, got {u_hat}")));
        }
        Ok(self.c / (8f64.sqrt() * std::f64::consts::PI * self.beta * u_hat))
    }
}

/// Position error bound `sqrt(tr(F^-1))` with the range-only Fisher matrix
/// `F = sum_j e_j e_j^T / sigma_j^2`.
pub fn sp_crlb(p: &Vec2, anchors: &[Anchor], sigmas: &[f64]) -> Result<f64> {
    if anchors.len() != sigmas.len() {
        return Err(Error::Validation(format!(
            "{} anchors but {} standard deviations",
            anchors.len(),
            sigmas.len()
        )));
    }
    if anchors.len() < 2 {
        return Err(Error::Geometry("at least two anchors are needed".into()));
    }
    let mut fim = Matrix2::<f64>::zeros();
    for (a, &s) in anchors.iter().zip(sigmas) {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {s}")));
        }
        let d = p - a.position;
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::Geometry(format!("position coincides with anchor {}", a.id)));
        }
        let e = d / r;
        fim += e * e.transpose() / (s * s);
    }
    let det = fim.determinant();
    let tr = fim.trace();
    if !(det > 1e-12 * tr * tr) {
        return Err(Error::Geometry("Fisher information is singular (collinear geometry)".into()));
    }
    // trace of the 2x2 inverse is trace / determinant
    Ok((tr / det).sqrt())
}
