//! Gamma, Beta and Dirichlet variates, plus per-environment seeding.
//!
//! Uniform bits come from ChaCha8; every environment gets its own stream of
//! the generator keyed by the experiment seed, so environment `e` draws the
//! same values regardless of how environments are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent generator for environment `env` under `seed`.
pub fn env_rng(seed: u64, env: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(env);
    rng
}

/// Derives the seed of sub-experiment `index` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on the open interval (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard normal by the Marsaglia polar method.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Gamma(shape, 1) by Marsaglia–Tsang squeeze/rejection; shapes below one
/// are boosted with `U^(1/shape)`.
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let boost = open_unit(rng).powf(1.0 / shape);
        return gamma(rng, shape + 1.0) * boost;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta(a, b) as the ratio `G_a / (G_a + G_b)`.
pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = gamma(rng, a);
    let y = gamma(rng, b);
    x / (x + y)
}

/// Dirichlet(alpha) by normalized Gamma variates.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = alpha.iter().map(|&a| gamma(rng, a)).collect();
    let total: f64 = g.iter().sum();
    for x in g.iter_mut() {
        *x /= total;
    }
    g
}

/// Index drawn from the probability vector `probs`.
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Beta(1, 3) CDF: 1 - (1 - x)^3.
    fn beta13_cdf(x: f64) -> f64 {
        1.0 - (1.0 - x).powi(3)
    }

    #[test]
    fn beta_ks_distance() {
        let mut rng = env_rng(7, 0);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| beta(&mut rng, 1.0, 3.0)).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let f = beta13_cdf(x);
                (f - k as f64 / n as f64).abs().max(((k + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn gamma_small_shape_mean() {
        let mut rng = env_rng(11, 3);
        let n = 200_000;
        let mean = (0..n).map(|_| gamma(&mut rng, 0.5)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut rng = env_rng(1, 1);
        for _ in 0..1000 {
            let p = dirichlet(&mut rng, &[1.0, 1.0, 1.0]);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| env_rng(5, 2).gen()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let b: u64 = env_rng(5, 3).gen();
        assert_ne!(a[0], b);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}
