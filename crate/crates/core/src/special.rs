//! Special functions needed by the amplitude model.

/// `ln(I0(x) * exp(-x))` for `x >= 0`, with `I0` the modified Bessel function
/// of the first kind and order zero.
///
/// Power series below 20, Hankel asymptotic expansion above. Both are
/// accurate to a few ulps over their range.
pub fn ln_i0e(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 20.0 {
        let y = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k: f64 = 1.0;
        loop {
            term *= y / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum.ln() - x
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k: f64 = 1.0;
        loop {
            let next = term * (2.0 * k - 1.0).powi(2) / (8.0 * k * x);
            if next >= term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * x).ln()
    }
}

/// Log density of the Rice distribution with unit spread and noncentrality `nu`.
pub fn ln_rice_pdf(x: f64, nu: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    x.ln() - 0.5 * (x - nu) * (x - nu) + ln_i0e(x * nu)
}

/// Log density of the Rayleigh distribution with unit spread.
pub fn ln_rayleigh_pdf(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    x.ln() - 0.5 * x * x
}

/// First-order Marcum Q function `Q1(a, b)`: the probability that a unit-spread
/// Rician variable with noncentrality `a` exceeds `b`.
///
/// Evaluated as a Poisson mixture of central chi-square tails,
/// `Q1(a, b) = sum_k Pois(k; a^2/2) * P(Pois(b^2/2) <= k)`.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0);
    if b == 0.0 {
        return 1.0;
    }
    let lambda = 0.5 * a * a;
    let mu = 0.5 * b * b;
    let (ln_lambda, ln_mu) = (lambda.ln(), mu.ln());
    let k_max = (lambda + 20.0 * lambda.sqrt() + 60.0).ceil() as usize;

    let mut ln_w = -lambda;
    let mut ln_c = -mu;
    let mut cdf = ln_c.exp();
    let mut q = ln_w.exp() * cdf;
    for k in 1..=k_max {
        let kf = k as f64;
        // lambda == 0 leaves only the k = 0 term
        if lambda == 0.0 {
            break;
        }
        ln_w += ln_lambda - kf.ln();
        ln_c += ln_mu - kf.ln();
        cdf += ln_c.exp();
        q += ln_w.exp() * cdf.min(1.0);
    }
    q.clamp(0.0, 1.0)
}

/// Numerically stable `ln(sum(exp(x)))`. Returns `-inf` for an empty or all
/// `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights in place into linear weights summing to one.
/// Returns `false` (leaving the slice untouched) if no weight is positive.
pub fn normalize_log_weights(ln_w: &[f64], out: &mut [f64]) -> bool {
    // shift by the maximum before exponentiating; subtracting a log-sum of
    // large magnitude would cost digits
    let max = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return false;
    }
    let mut total = 0.0;
    for (o, l) in out.iter_mut().zip(ln_w) {
        *o = (l - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    // Simpson quadrature of the Rician tail, independent of the series above
    // except for the Bessel evaluation.
    fn rician_cdf_quad(a: f64, b: f64) -> f64 {
        let n = 20_000;
        let h = b / n as f64;
        let f = |x: f64| ln_rice_pdf(x, a).exp();
        let mut s = f(0.0) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn i0_reference_values() {
        // I0(1) = 1.2660658777520082, I0(10) = 2815.716628466254,
        // I0(25) = 5.7745606064663105e9, I0(50) = 2.9325537838493355e20
        let cases = [
            (0.0, 1.0),
            (1.0, 1.2660658777520082),
            (10.0, 2815.716628466254),
            (25.0, 5.7745606064663105e9),
            (50.0, 2.9325537838493355e20),
        ];
        for (x, i0) in cases {
            let got = (ln_i0e(x) + x).exp();
            assert!(((got - i0) / i0).abs() < 1e-12, "x={x}: {got} vs {i0}");
        }
    }

    #[test]
    fn i0_branches_agree_at_switch() {
        let below = ln_i0e(20.0 - 1e-9);
        let above = ln_i0e(20.0);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn marcum_limits() {
        assert_eq!(marcum_q1(3.0, 0.0), 1.0);
        for b in [0.5, 1.0, 2.0, 4.0] {
            let q = marcum_q1(0.0, b);
            assert!((q - (-0.5 * b * b).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn marcum_matches_quadrature() {
        for &(a, b) in &[(3.0, 2.0), (1.0, 1.5), (5.0, 6.0), (0.5, 3.0), (10.0, 8.0)] {
            let q = marcum_q1(a, b);
            let oracle = 1.0 - rician_cdf_quad(a, b);
            assert!((q - oracle).abs() < 1e-10, "a={a} b={b}: {q} vs {oracle}");
        }
    }

    #[test]
    fn marcum_large_arguments_stay_in_range() {
        let q = marcum_q1(40.0, 2.0);
        assert!((q - 1.0).abs() < 1e-12);
        let q = marcum_q1(2.0, 40.0);
        assert!((0.0..1e-100).contains(&q));
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn normalization_keeps_precision_far_from_zero() {
        let ln_w = [-1e11, -1e11 - 1.0];
        let mut out = [0.0; 2];
        assert!(normalize_log_weights(&ln_w, &mut out));
        let expect = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((out[0] - expect).abs() < 1e-14, "{out:?}");
        let mut untouched = [5.0; 2];
        assert!(!normalize_log_weights(&[f64::NEG_INFINITY; 2], &mut untouched));
        assert_eq!(untouched, [5.0; 2]);
    }
}
