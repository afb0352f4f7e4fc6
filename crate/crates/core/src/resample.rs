//! Systematic resampling and effective sample size.

use rand::Rng;

/// `1 / sum(w^2)` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Draws `n` ancestor indices with a single uniform offset.
/// `weights` must be normalized.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    if weights.is_empty() || n == 0 {
        return out;
    }
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut cum = weights[0];
    let mut i = 0;
    let last = weights.len() - 1;
    for _ in 0..n {
        while u > cum && i < last {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_weights_keep_every_particle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = vec![0.25; 4];
        let mut idx = systematic_indices(&w, 4, &mut rng);
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn point_mass_is_copied() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = vec![0.0, 0.0, 1.0, 0.0];
        assert_eq!(systematic_indices(&w, 6, &mut rng), vec![2; 6]);
    }

    #[test]
    fn ess_bounds() {
        assert!((effective_sample_size(&[0.25; 4]) - 4.0).abs() < 1e-12);
        assert!((effective_sample_size(&[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counts_are_within_one_of_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = [0.1, 0.35, 0.05, 0.5];
        let n = 1000;
        for _ in 0..20 {
            let idx = systematic_indices(&w, n, &mut rng);
            for (k, wk) in w.iter().enumerate() {
                let c = idx.iter().filter(|&&i| i == k).count() as f64;
                assert!((c - wk * n as f64).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
