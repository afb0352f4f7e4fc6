//! State-transition kernels: constant-velocity agent kinematics, the
//! amplitude random walk, and the Markov chain of the LOS probability.

use nalgebra::{DMatrix, DVector, Matrix4, Matrix4x2, Vector2, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentState, LosGrid};

/// Constant-velocity model driven by white Gaussian acceleration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KinematicModel {
    pub dt: f64,
    pub sigma_a: f64,
}

impl KinematicModel {
    pub fn new(dt: f64, sigma_a: f64) -> Result<Self> {
        if !(dt > 0.0) || !(sigma_a >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kinematic model needs dt > 0 and sigma_a >= 0, got dt={dt}, sigma_a={sigma_a}"
            )));
        }
        Ok(Self { dt, sigma_a })
    }

    /// State transition matrix on `[px, py, vx, vy]`.
    pub fn transition(&self) -> Matrix4<f64> {
        let dt = self.dt;
        Matrix4::new(
            1.0, 0.0, dt, 0.0, //
            0.0, 1.0, 0.0, dt, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        )
    }

    /// Acceleration input matrix.
    pub fn noise_input(&self) -> Matrix4x2<f64> {
        let h = 0.5 * self.dt * self.dt;
        Matrix4x2::new(
            h, 0.0, //
            0.0, h, //
            self.dt, 0.0, //
            0.0, self.dt,
        )
    }

    /// Covariance of the additive process noise, `B (sigma_a^2 I) B^T`.
    pub fn process_covariance(&self) -> Matrix4<f64> {
        let b = self.noise_input();
        b * b.transpose() * (self.sigma_a * self.sigma_a)
    }

    pub fn propagate_mean(&self, x: &AgentState) -> AgentState {
        AgentState::new(x.p + x.v * self.dt, x.v)
    }

    /// Draws `x' = A x + B w` with `w ~ N(0, sigma_a^2 I)`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, x: &AgentState, rng: &mut R) -> AgentState {
        let w = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
            * self.sigma_a;
        let h = 0.5 * self.dt * self.dt;
        AgentState::new(x.p + x.v * self.dt + w * h, x.v + w * self.dt)
    }
}

/// Stacks a state as `[px, py, vx, vy]`.
pub fn state_vector(x: &AgentState) -> Vector4<f64> {
    Vector4::new(x.p.x, x.p.y, x.v.x, x.v.y)
}

/// Gaussian random walk of the normalized amplitude on `[0, u_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeWalk {
    pub sigma_u: f64,
    pub u_max: f64,
}

impl AmplitudeWalk {
    pub fn new(sigma_u: f64, u_max: f64) -> Result<Self> {
        if !(sigma_u >= 0.0) || !(u_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude walk needs sigma_u >= 0 and u_max > 0, got {sigma_u}, {u_max}"
            )));
        }
        Ok(Self { sigma_u, u_max })
    }

    /// `u' ~ N(u, sigma_u^2)`, reflected at zero and clipped at `u_max`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, u: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (u + self.sigma_u * z).abs().min(self.u_max)
    }
}

/// The ten-state LOS-probability chain on `{0.1, 0.2, ..., 1.0}`.
pub fn default_los_grid() -> LosGrid {
    const Q: usize = 10;
    let values = (1..=Q).map(|k| k as f64 / 10.0).collect();
    let mut t = DMatrix::zeros(Q, Q);
    t[(0, 0)] = 0.9;
    t[(1, 0)] = 0.1;
    t[(Q - 1, Q - 1)] = 0.95;
    t[(Q - 2, Q - 1)] = 0.05;
    for k in 1..Q - 1 {
        t[(k, k)] = 0.85;
        t[(k - 1, k)] = 0.05;
        t[(k + 1, k)] = 0.1;
    }
    LosGrid::new(values, t).expect("default LOS grid is column-stochastic")
}

/// One prediction step of the LOS-probability PMF.
pub fn propagate_q_pmf(pmf: &[f64], grid: &LosGrid) -> Result<Vec<f64>> {
    if pmf.len() != grid.len() {
        return Err(Error::Validation(format!(
            "pmf has {} entries, grid has {}",
            pmf.len(),
            grid.len()
        )));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 || pmf.iter().any(|&x| x < 0.0) {
        return Err(Error::Validation(format!("pmf is not normalized (sum {total})")));
    }
    let out = grid.transition() * DVector::from_column_slice(pmf);
    Ok(out.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vec2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_kinematics() {
        let model = KinematicModel::new(0.05, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = AgentState::new(Vec2::new(2.0, -1.0), Vec2::new(1.0, 0.0));
        let y = model.sample_transition(&x, &mut rng);
        assert!((y.p - Vec2::new(2.05, -1.0)).norm() < 1e-15);
        assert_eq!(y.v, x.v);
        let still = AgentState::new(Vec2::new(2.0, -1.0), Vec2::zeros());
        assert_eq!(model.sample_transition(&still, &mut rng), still);
    }

    #[test]
    fn sampling_matches_matrix_form() {
        let model = KinematicModel::new(0.05, 0.3).unwrap();
        let x = AgentState::new(Vec2::new(1.0, 2.0), Vec2::new(-0.5, 1.5));
        let mean = model.transition() * state_vector(&x);
        assert!((state_vector(&model.propagate_mean(&x)) - mean).norm() < 1e-15);
    }

    #[test]
    fn process_noise_covariance_monte_carlo() {
        let model = KinematicModel::new(0.05, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = AgentState::new(Vec2::new(1.0, 2.0), Vec2::new(0.3, -0.2));
        let mean = model.transition() * state_vector(&x);
        let n = 100_000;
        let mut cov = Matrix4::<f64>::zeros();
        for _ in 0..n {
            let e = state_vector(&model.sample_transition(&x, &mut rng)) - mean;
            cov += e * e.transpose();
        }
        cov /= n as f64;
        let expected = model.process_covariance();
        for i in 0..4 {
            for j in 0..4 {
                let e = expected[(i, j)];
                if e.abs() > 0.0 {
                    assert!(((cov[(i, j)] - e) / e).abs() < 0.05, "({i},{j}) {} vs {e}", cov[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let model = KinematicModel::new(0.05, 0.3).unwrap();
        let x = AgentState::new(Vec2::new(1.0, 2.0), Vec2::new(0.3, -0.2));
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..50).map(|_| model.sample_transition(&x, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn amplitude_walk_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frozen = AmplitudeWalk::new(0.0, 40.0).unwrap();
        assert_eq!(frozen.sample_transition(5.5, &mut rng), 5.5);

        let walk = AmplitudeWalk::new(0.2, 40.0).unwrap();
        for _ in 0..10_000 {
            assert!(walk.sample_transition(0.0, &mut rng) >= 0.0);
            assert!(walk.sample_transition(39.99, &mut rng) <= 40.0);
        }
        let n = 100_000;
        let u = 10.0;
        let mean = (0..n).map(|_| walk.sample_transition(u, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - u).abs() < 3.0 * 0.2 / (n as f64).sqrt());
    }

    #[test]
    fn default_grid_entries() {
        let g = default_los_grid();
        let t = g.transition();
        assert_eq!(g.values().len(), 10);
        assert!((g.values()[9] - 1.0).abs() < 1e-15);
        assert_eq!(t[(0, 0)] + t[(1, 0)], 1.0);
        assert!((t[(3, 4)] + t[(4, 4)] + t[(5, 4)] - 1.0).abs() < 1e-15);
        assert_eq!(t[(8, 9)] + t[(9, 9)], 1.0);
        for col in t.column_iter() {
            assert!((col.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn q_prediction() {
        let g = default_los_grid();
        let mut delta = vec![0.0; 10];
        delta[9] = 1.0;
        let out = propagate_q_pmf(&delta, &g).unwrap();
        assert!((out[8] - 0.05).abs() < 1e-15);
        assert!((out[9] - 0.95).abs() < 1e-15);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let id = LosGrid::new(vec![0.5, 1.0], DMatrix::identity(2, 2)).unwrap();
        assert_eq!(propagate_q_pmf(&[0.3, 0.7], &id).unwrap(), vec![0.3, 0.7]);
        assert!(propagate_q_pmf(&[0.3, 0.6], &id).is_err());
    }

    #[test]
    fn stationary_distribution_is_fixed() {
        let g = default_los_grid();
        // birth-death chain: detailed balance gives pi_{k+1}/pi_k = up_k / down_{k+1}
        let t = g.transition();
        let mut pi = vec![1.0; 10];
        for k in 0..9 {
            pi[k + 1] = pi[k] * t[(k + 1, k)] / t[(k, k + 1)];
        }
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= s);
        let next = propagate_q_pmf(&pi, &g).unwrap();
        for (a, b) in pi.iter().zip(&next) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
