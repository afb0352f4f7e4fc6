//! Measurement densities: LOS/NLOS distance and amplitude likelihoods, the
//! association prior, and the per-scan pseudo-likelihood used by the filter.
//!
//! Products over the measurements of a scan are accumulated in the log
//! domain; the public functions return linear values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_i0e, ln_rayleigh_pdf, ln_rice_pdf, marcum_q1};
use crate::types::{los_distance, AmplitudeParams, Anchor, Measurement, NlosParams, Scan, Vec2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Index of the LOS-originated measurement; `0` means the scan holds no LOS
/// measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssociationHypothesis(pub usize);

impl AssociationHypothesis {
    pub const NONE: Self = Self(0);

    pub fn is_los(&self) -> bool {
        self.0 > 0
    }
}

pub fn ln_gaussian(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
}

/// Gaussian density of the measured distance around the LOS distance.
pub fn f_los_distance(meas: &Measurement, p: &Vec2, anchor: &Anchor) -> Result<f64> {
    if !(meas.sigma_d_hat > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "distance std must be positive, got {}",
            meas.sigma_d_hat
        )));
    }
    Ok(ln_gaussian(meas.d_hat, los_distance(p, anchor), meas.sigma_d_hat).exp())
}

/// Double-exponential density of the multipath excess delay `delta`
/// (distance beyond `d_LOS + B`).
pub fn f_mp_offset(delta: f64, params: &NlosParams) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    let NlosParams { gamma_r, gamma_f, .. } = *params;
    (gamma_f + gamma_r) / (gamma_f * gamma_f)
        * (-(-delta / gamma_r).exp_m1())
        * (-delta / gamma_f).exp()
}

/// Multipath distance density given the agent position.
pub fn f_mp(d_hat: f64, p: &Vec2, anchor: &Anchor, params: &NlosParams) -> f64 {
    f_mp_offset(d_hat - los_distance(p, anchor) - params.bias_b, params)
}

/// Uniform false-alarm density on `[0, d_max]`, both ends included.
pub fn f_fa(d_hat: f64, d_max: f64) -> f64 {
    if (0.0..=d_max).contains(&d_hat) {
        1.0 / d_max
    } else {
        0.0
    }
}

fn f_nlos_from_dlos(d_hat: f64, d_los: f64, params: &NlosParams) -> f64 {
    let mp = if params.p_mp > 0.0 {
        params.p_mp * f_mp_offset(d_hat - d_los - params.bias_b, params)
    } else {
        0.0
    };
    mp + (1.0 - params.p_mp) * f_fa(d_hat, params.d_max)
}

/// NLOS distance density: `P_MP * f_mp + (1 - P_MP) * f_fa`.
pub fn f_nlos_distance(d_hat: f64, p: &Vec2, anchor: &Anchor, params: &NlosParams) -> f64 {
    f_nlos_from_dlos(d_hat, los_distance(p, anchor), params)
}

/// Probability that a unit-spread Rician amplitude with noncentrality `u`
/// exceeds the threshold `gamma`.
pub fn detection_prob(u: f64, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        1.0
    } else {
        marcum_q1(u.max(0.0), gamma)
    }
}

fn ln_los_amplitude(u_hat: f64, u: f64, params: &AmplitudeParams) -> f64 {
    if u_hat < params.gamma {
        return f64::NEG_INFINITY;
    }
    ln_rice_pdf(u_hat, u) - detection_prob(u, params.gamma).ln()
}

fn ln_nlos_amplitude(u_hat: f64, params: &AmplitudeParams) -> f64 {
    if u_hat < params.gamma {
        return f64::NEG_INFINITY;
    }
    ln_rayleigh_pdf(u_hat) + 0.5 * params.gamma * params.gamma
}

/// LOS amplitude density: Rician with unit spread, truncated below `gamma`
/// and renormalized by the detection probability.
pub fn f_los_amplitude(u_hat: f64, u: f64, params: &AmplitudeParams) -> f64 {
    ln_los_amplitude(u_hat, u, params).exp()
}

/// NLOS amplitude density: unit-spread Rayleigh truncated below `gamma`.
pub fn f_nlos_amplitude(u_hat: f64, params: &AmplitudeParams) -> f64 {
    ln_nlos_amplitude(u_hat, params).exp()
}

/// Joint prior of the association variable and the measurement count under
/// the non-parametric clutter-count model.
pub fn association_prior(a: AssociationHypothesis, m_count: usize, p_e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::InvalidParameter(format!("p_e = {p_e} is not a probability")));
    }
    match a.0 {
        0 => Ok(1.0 - p_e),
        k if k <= m_count => Ok(p_e / m_count as f64),
        k => Err(Error::Domain(format!(
            "association {k} exceeds measurement count {m_count}"
        ))),
    }
}

/// The inference-side measurement model. Wraps the NLOS and amplitude
/// parameters together with the switches that turn individual features off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementModel {
    pub nlos: NlosParams,
    pub amplitude: AmplitudeParams,
    /// When false the LOS/NLOS amplitude ratio is defined as one.
    pub use_amplitude: bool,
    /// Replaces every reported distance std when set.
    pub sigma_override: Option<f64>,
}

impl MeasurementModel {
    pub fn new(nlos: NlosParams, amplitude: AmplitudeParams) -> Self {
        Self {
            nlos,
            amplitude,
            use_amplitude: true,
            sigma_override: None,
        }
    }

    pub fn sigma(&self, meas: &Measurement) -> f64 {
        self.sigma_override.unwrap_or(meas.sigma_d_hat)
    }

    /// Rejects measurements the densities cannot explain.
    pub fn check(&self, meas: &Measurement) -> Result<()> {
        let sigma = self.sigma(meas);
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "distance std must be positive, got {sigma}"
            )));
        }
        if !(0.0..=self.nlos.d_max).contains(&meas.d_hat) {
            return Err(Error::Domain(format!(
                "measured distance {} outside [0, {}]",
                meas.d_hat, self.nlos.d_max
            )));
        }
        if self.use_amplitude && !(meas.u_hat >= self.amplitude.gamma) {
            return Err(Error::Domain(format!(
                "amplitude {} below detection threshold {}",
                meas.u_hat, self.amplitude.gamma
            )));
        }
        Ok(())
    }

    pub fn ln_los_distance(&self, meas: &Measurement, d_los: f64) -> f64 {
        ln_gaussian(meas.d_hat, d_los, self.sigma(meas))
    }

    pub fn ln_nlos_distance(&self, d_hat: f64, d_los: f64) -> f64 {
        f_nlos_from_dlos(d_hat, d_los, &self.nlos).ln()
    }

    /// `ln f_L(u_hat | u) - ln f_NL(u_hat)`, or zero with amplitudes disabled.
    pub fn ln_amplitude_ratio(&self, u_hat: f64, u: f64) -> f64 {
        if !self.use_amplitude {
            return 0.0;
        }
        let gamma = self.amplitude.gamma;
        if u_hat < gamma {
            return f64::NEG_INFINITY;
        }
        // ln Rice - ln Rayleigh with the common ln(u_hat) cancelled
        let x = u_hat * u;
        x - 0.5 * u * u + ln_i0e(x) - detection_prob(u, gamma).ln() - 0.5 * gamma * gamma
    }

    pub fn detection_prob(&self, u: f64) -> f64 {
        detection_prob(u, self.amplitude.gamma)
    }

    /// LOS-versus-NLOS likelihood ratio of a single measurement.
    pub fn likelihood_ratio(&self, meas: &Measurement, p: &Vec2, anchor: &Anchor, u: f64) -> Result<f64> {
        self.check(meas)?;
        let d_los = los_distance(p, anchor);
        let ln_nl = self.ln_nlos_distance(meas.d_hat, d_los);
        if ln_nl == f64::NEG_INFINITY {
            return Err(Error::Domain(format!(
                "NLOS density vanishes at d = {}; ratio undefined",
                meas.d_hat
            )));
        }
        Ok((self.ln_los_distance(meas, d_los) - ln_nl + self.ln_amplitude_ratio(meas.u_hat, u)).exp())
    }

    fn ln_pseudo_likelihood(
        &self,
        scan: &Scan,
        p: &Vec2,
        u: f64,
        a: AssociationHypothesis,
        anchor: &Anchor,
    ) -> Result<f64> {
        if a.0 > scan.len() {
            return Err(Error::Domain(format!(
                "association {} exceeds measurement count {}",
                a.0,
                scan.len()
            )));
        }
        let d_los = los_distance(p, anchor);
        let mut ln_g = 0.0;
        for (m, meas) in scan.measurements.iter().enumerate() {
            self.check(meas)?;
            if a.0 == m + 1 {
                // f_NL(d) * Lambda = f_L(d) * amplitude ratio
                ln_g += self.ln_los_distance(meas, d_los) + self.ln_amplitude_ratio(meas.u_hat, u);
            } else {
                ln_g += self.ln_nlos_distance(meas.d_hat, d_los);
            }
        }
        Ok(ln_g)
    }

    /// Scan pseudo-likelihood: the product of all NLOS distance densities,
    /// times the likelihood ratio of the measurement selected by `a`.
    pub fn pseudo_likelihood(
        &self,
        scan: &Scan,
        p: &Vec2,
        u: f64,
        a: AssociationHypothesis,
        anchor: &Anchor,
    ) -> Result<f64> {
        Ok(self.ln_pseudo_likelihood(scan, p, u, a, anchor)?.exp())
    }

    /// Association prior times pseudo-likelihood, with `p_e = P_D(u) * q`.
    pub fn joint_factor(
        &self,
        scan: &Scan,
        p: &Vec2,
        u: f64,
        a: AssociationHypothesis,
        q: f64,
        anchor: &Anchor,
    ) -> Result<f64> {
        let p_e = self.detection_prob(u) * q;
        let prior = association_prior(a, scan.len(), p_e)?;
        Ok(prior * self.pseudo_likelihood(scan, p, u, a, anchor)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PEAK: f64 = 3.989_422_804_014_327; // 1 / (0.1 * sqrt(2 pi))

    fn origin() -> Anchor {
        Anchor::new(1, 0.0, 0.0)
    }

    fn default_nlos() -> NlosParams {
        NlosParams::default()
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn los_distance_density() {
        let p = Vec2::new(3.0, 4.0);
        let m = Measurement::new(5.0, 1.0, 0.1);
        assert!((f_los_distance(&m, &p, &origin()).unwrap() - PEAK).abs() < 1e-12);
        let m = Measurement::new(5.1, 1.0, 0.1);
        let v = f_los_distance(&m, &p, &origin()).unwrap();
        assert!((v - PEAK * (-0.5f64).exp()).abs() < 1e-12);
        let m = Measurement::new(500.0, 1.0, 0.1);
        assert_eq!(f_los_distance(&m, &p, &origin()).unwrap(), 0.0);
        let m = Measurement::new(5.0, 1.0, 0.0);
        assert!(f_los_distance(&m, &p, &origin()).is_err());
    }

    #[test]
    fn multipath_density_values() {
        let params = NlosParams {
            gamma_r: 1.5,
            gamma_f: 6.0,
            bias_b: 0.2,
            ..default_nlos()
        };
        let p = Vec2::new(10.0, 0.0);
        // delta = 12 - 10 - 0.2 = 1.8
        let v = f_mp(12.0, &p, &origin(), &params);
        assert!((v - 0.107_851_679_277_768_34).abs() < 1e-12, "{v}");
        assert_eq!(f_mp(10.1, &p, &origin(), &params), 0.0);
        assert_eq!(f_mp(10.2, &p, &origin(), &params), 0.0);

        let mix = f_nlos_distance(12.0, &p, &origin(), &params);
        assert!((mix - (0.9 * 0.107_851_679_277_768_34 + 0.1 * 0.02)).abs() < 1e-12);
    }

    #[test]
    fn multipath_density_is_normalized() {
        // closed form: c * (gamma_f - gamma_f*gamma_r/(gamma_f+gamma_r)) with
        // c = (gamma_f+gamma_r)/gamma_f^2 equals exactly one
        let params = default_nlos();
        let (gr, gf) = (params.gamma_r, params.gamma_f);
        let analytic = (gf + gr) / (gf * gf) * (gf - gf * gr / (gf + gr));
        assert!((analytic - 1.0).abs() < 1e-15);
        let numeric = simpson(|d| f_mp_offset(d, &params), 0.0, 400.0, 400_000);
        assert!((numeric - 1.0).abs() < 1e-8, "{numeric}");
    }

    #[test]
    fn false_alarm_density() {
        assert!((f_fa(10.0, 50.0) - 0.02).abs() < 1e-15);
        assert_eq!(f_fa(60.0, 50.0), 0.0);
        assert_eq!(f_fa(0.0, 50.0), 0.02);
        assert_eq!(f_fa(50.0, 50.0), 0.02);
        assert_eq!(f_fa(-1e-9, 50.0), 0.0);
    }

    #[test]
    fn nlos_mixture_degenerates_to_uniform() {
        let params = NlosParams {
            p_mp: 0.0,
            ..default_nlos()
        };
        let p = Vec2::new(7.0, 1.0);
        for d in [0.0, 3.0, 7.5, 12.0, 49.0, 55.0] {
            assert_eq!(f_nlos_distance(d, &p, &origin(), &params), f_fa(d, 50.0));
        }
    }

    #[test]
    fn nlos_mixture_is_nearly_normalized() {
        let params = default_nlos();
        let p = Vec2::new(5.0, 0.0);
        let total = simpson(|d| f_nlos_distance(d, &p, &origin(), &params), 0.0, 50.0, 200_000);
        // multipath mass beyond d_max is the only deficit
        let tail = simpson(|d| f_mp_offset(d, &params), 50.0 - 5.2, 400.0, 200_000);
        assert!((total - (1.0 - 0.9 * tail)).abs() < 1e-8);
        assert!((total - 1.0).abs() < 1e-2);
    }

    #[test]
    fn amplitude_densities_reduce_to_rayleigh() {
        let amp = AmplitudeParams { gamma: 0.0, u_max: 40.0 };
        let rayleigh_at_1 = (-0.5f64).exp();
        assert!((f_los_amplitude(1.0, 0.0, &amp) - rayleigh_at_1).abs() < 1e-14);
        assert!((f_nlos_amplitude(1.0, &amp) - rayleigh_at_1).abs() < 1e-14);
        assert_eq!(detection_prob(7.0, 0.0), 1.0);
        // 5 * exp(-25) * I0(25), cross-checked against scipy.stats.rice.pdf(5, 5)
        let v = f_los_amplitude(5.0, 5.0, &amp);
        assert!((v - 0.400_983_867_737_183_6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn amplitude_densities_vanish_below_threshold() {
        let amp = AmplitudeParams { gamma: 2.0, u_max: 40.0 };
        assert_eq!(f_los_amplitude(1.9, 3.0, &amp), 0.0);
        assert_eq!(f_nlos_amplitude(1.9, &amp), 0.0);
        assert!(f_nlos_amplitude(2.0, &amp) > 0.0);
    }

    #[test]
    fn truncated_amplitudes_integrate_to_one() {
        for gamma in [0.0, 1.0, 2.0] {
            let amp = AmplitudeParams { gamma, u_max: 40.0 };
            let nl = simpson(|x| f_nlos_amplitude(x, &amp), gamma, gamma + 40.0, 200_000);
            assert!((nl - 1.0).abs() < 1e-8, "gamma={gamma}: {nl}");
            for u in [0.0, 0.5, 3.0, 8.0] {
                let l = simpson(|x| f_los_amplitude(x, u, &amp), gamma, u + 40.0, 200_000);
                assert!((l - 1.0).abs() < 1e-8, "gamma={gamma} u={u}: {l}");
            }
        }
    }

    #[test]
    fn detection_probability_examples() {
        for g in [0.5, 1.0, 2.5] {
            assert!((detection_prob(0.0, g) - (-0.5 * g * g).exp()).abs() < 1e-14);
        }
        // scipy.stats.rice.sf(2, 3)
        assert!((detection_prob(3.0, 2.0) - 0.886_720_754_402_392_6).abs() < 1e-10);
    }

    #[test]
    fn association_prior_examples() {
        let h = |a, m, pe| association_prior(AssociationHypothesis(a), m, pe).unwrap();
        assert!((h(3, 10, 0.8) - 0.08).abs() < 1e-15);
        assert!((h(0, 10, 0.8) - 0.2).abs() < 1e-15);
        assert_eq!(h(0, 4, 0.0), 1.0);
        assert_eq!(h(2, 4, 0.0), 0.0);
        assert_eq!(h(0, 0, 0.7), 1.0 - 0.7);
        assert!(association_prior(AssociationHypothesis(1), 0, 0.5).is_err());
        assert!(association_prior(AssociationHypothesis(5), 4, 0.5).is_err());
    }

    #[test]
    fn likelihood_ratio_examples() {
        let nlos = NlosParams { p_mp: 0.9, ..default_nlos() };
        let amp = AmplitudeParams::default();
        let mut model = MeasurementModel::new(nlos, amp);
        model.use_amplitude = false;
        let p = Vec2::new(10.0, 0.0);
        // d_hat = d_LOS so delta = -B < 0 and only the uniform floor remains
        let m = Measurement::new(10.0, 3.0, 0.1);
        let r = model.likelihood_ratio(&m, &p, &origin(), 5.0).unwrap();
        assert!((r - PEAK / (0.1 / 50.0)).abs() < 1e-9, "{r}");
        assert!((r - 1994.7).abs() < 0.05);

        // u = 0 and gamma = 0: Rice and Rayleigh coincide
        model.use_amplitude = true;
        let r0 = model.likelihood_ratio(&m, &p, &origin(), 0.0).unwrap();
        assert!((r0 - r).abs() < 1e-9 * r);

        let outside = Measurement::new(51.0, 3.0, 0.1);
        assert!(model.likelihood_ratio(&outside, &p, &origin(), 1.0).is_err());
    }

    #[test]
    fn pseudo_likelihood_examples() {
        let model = MeasurementModel::new(default_nlos(), AmplitudeParams::default());
        let p = Vec2::new(6.0, 8.0);
        let a0 = AssociationHypothesis::NONE;
        let empty = Scan::new(1, 1, vec![]);
        assert_eq!(model.pseudo_likelihood(&empty, &p, 4.0, a0, &origin()).unwrap(), 1.0);

        let z1 = Measurement::new(10.05, 6.0, 0.05);
        let one = Scan::new(1, 1, vec![z1]);
        let g0 = model.pseudo_likelihood(&one, &p, 4.0, a0, &origin()).unwrap();
        let fnl = f_nlos_distance(z1.d_hat, &p, &origin(), &model.nlos);
        assert!((g0 - fnl).abs() < 1e-15);
        let g1 = model
            .pseudo_likelihood(&one, &p, 4.0, AssociationHypothesis(1), &origin())
            .unwrap();
        let amp = AmplitudeParams::default();
        let expected = f_los_distance(&z1, &p, &origin()).unwrap() * f_los_amplitude(6.0, 4.0, &amp)
            / f_nlos_amplitude(6.0, &amp);
        assert!((g1 - expected).abs() < 1e-12 * expected);

        let three = Scan::new(
            1,
            1,
            vec![
                Measurement::new(14.0, 0.7, 0.4),
                Measurement::new(10.02, 5.0, 0.06),
                Measurement::new(30.0, 1.2, 0.3),
            ],
        );
        let w0 = model.pseudo_likelihood(&three, &p, 4.0, a0, &origin()).unwrap();
        let w2 = model
            .pseudo_likelihood(&three, &p, 4.0, AssociationHypothesis(2), &origin())
            .unwrap();
        let lr = model
            .likelihood_ratio(&three.measurements[1], &p, &origin(), 4.0)
            .unwrap();
        assert!((w2 / w0 - lr).abs() < 1e-10 * lr);
        assert!(model
            .pseudo_likelihood(&three, &p, 4.0, AssociationHypothesis(4), &origin())
            .is_err());
    }

    #[test]
    fn joint_factor_examples() {
        let model = MeasurementModel::new(default_nlos(), AmplitudeParams::default());
        let p = Vec2::new(3.0, 4.0);
        let scan = Scan::new(
            1,
            1,
            vec![Measurement::new(5.01, 8.0, 0.03), Measurement::new(9.0, 1.0, 0.3)],
        );
        // q -> 0 puts all mass on a = 0
        let weights: Vec<f64> = (0..=2)
            .map(|a| {
                model
                    .joint_factor(&scan, &p, 8.0, AssociationHypothesis(a), 1e-40, &origin())
                    .unwrap()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        assert!(weights[0] / total > 1.0 - 1e-6);

        // gamma = 0: p_e equals q
        let q = 0.37;
        let j1 = model
            .joint_factor(&scan, &p, 8.0, AssociationHypothesis(1), q, &origin())
            .unwrap();
        let g1 = model
            .pseudo_likelihood(&scan, &p, 8.0, AssociationHypothesis(1), &origin())
            .unwrap();
        assert!((j1 - q / 2.0 * g1).abs() < 1e-12 * j1);
    }

    #[test]
    fn malformed_distance_is_an_error() {
        let model = MeasurementModel::new(default_nlos(), AmplitudeParams::default());
        let scan = Scan::new(1, 1, vec![Measurement::new(55.0, 1.0, 0.3)]);
        let r = model.pseudo_likelihood(&scan, &Vec2::new(1.0, 1.0), 1.0, AssociationHypothesis::NONE, &origin());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    fn meas_strategy() -> impl Strategy<Value = Measurement> {
        (0.0..50.0f64, 0.01..20.0f64, 0.01..2.0f64).prop_map(|(d, u, s)| Measurement::new(d, u, s))
    }

    proptest! {
        #[test]
        fn association_prior_sums_to_one(m in 0usize..60, pe in 0.0..=1.0f64) {
            let total: f64 = (0..=m)
                .map(|a| association_prior(AssociationHypothesis(a), m, pe).unwrap())
                .sum();
            let expected = if m == 0 { 1.0 - pe } else { 1.0 };
            prop_assert!((total - expected).abs() < 1e-12);
        }

        #[test]
        fn ratio_ignores_unrelated_measurements(
            sel in meas_strategy(),
            others in prop::collection::vec(meas_strategy(), 0..6),
            px in -20.0..20.0f64, py in -20.0..20.0f64, u in 0.0..20.0f64,
        ) {
            let model = MeasurementModel::new(default_nlos(), AmplitudeParams::default());
            let p = Vec2::new(px, py);
            let mut ms = vec![sel];
            let base = Scan::new(1, 1, ms.clone());
            ms.extend(others);
            let extended = Scan::new(1, 1, ms);
            let ratio = |s: &Scan| {
                let g0 = model.ln_pseudo_likelihood(s, &p, u, AssociationHypothesis(0), &origin()).unwrap();
                let g1 = model.ln_pseudo_likelihood(s, &p, u, AssociationHypothesis(1), &origin()).unwrap();
                g1 - g0
            };
            let (a, b) = (ratio(&base), ratio(&extended));
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn pseudo_likelihood_recovers_standard_pda(
            ms in prop::collection::vec(meas_strategy(), 1..6),
            px in -20.0..20.0f64, py in -20.0..20.0f64,
        ) {
            // uniform clutter and no amplitude: the a-th term is proportional
            // to the Gaussian LOS density of measurement a
            let nlos = NlosParams { p_mp: 0.0, ..default_nlos() };
            let mut model = MeasurementModel::new(nlos, AmplitudeParams::default());
            model.use_amplitude = false;
            let p = Vec2::new(px, py);
            let scan = Scan::new(1, 1, ms.clone());
            let anchor = origin();
            let d_los = los_distance(&p, &anchor);
            let g0 = model.ln_pseudo_likelihood(&scan, &p, 1.0, AssociationHypothesis(0), &anchor).unwrap();
            for (k, m) in ms.iter().enumerate() {
                let g = model.ln_pseudo_likelihood(&scan, &p, 1.0, AssociationHypothesis(k + 1), &anchor).unwrap();
                let pda = ln_gaussian(m.d_hat, d_los, m.sigma_d_hat) + nlos.d_max.ln();
                prop_assert!(((g - g0) - pda).abs() < 1e-9 * pda.abs().max(1.0));
            }
        }

        #[test]
        fn densities_are_non_negative(d in -10.0..80.0f64, u in 0.0..30.0f64, uh in 0.0..40.0f64,
                                      px in -30.0..30.0f64, g in 0.0..3.0f64) {
            let p = Vec2::new(px, 0.0);
            let amp = AmplitudeParams { gamma: g, u_max: 40.0 };
            prop_assert!(f_mp(d, &p, &origin(), &default_nlos()) >= 0.0);
            prop_assert!(f_nlos_distance(d, &p, &origin(), &default_nlos()) >= 0.0);
            prop_assert!(f_los_amplitude(uh, u, &amp) >= 0.0);
            prop_assert!(f_nlos_amplitude(uh, &amp) >= 0.0);
            let pd = detection_prob(u, g);
            prop_assert!((0.0..=1.0).contains(&pd));
        }
    }
}
