//! Seeded random streams and the probe vectors used by the sampling estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent deterministic stream `index` derived from `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn gaussian_vector<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn random_signs<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Random subset of `0..dim` of exactly `size` elements, sorted.
pub fn random_subset<R: Rng>(dim: usize, size: usize, rng: &mut R) -> Vec<usize> {
    let size = size.min(dim);
    let mut picked = rand::seq::index::sample(rng, dim, size).into_vec();
    picked.sort_unstable();
    picked
}

/// Vector number `k` of a mixed probe family: spikes, flat indicators,
/// power-law decays, alternating signs, sparse and dense Gaussian vectors.
/// Families cycle with `k`, so any prefix of the sequence mixes all shapes.
pub fn probe_vector<R: Rng>(dim: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let mut f = vec![0.0; dim];
    if dim == 0 {
        return f;
    }
    match k % 6 {
        0 => {
            let i = rng.random_range(0..dim);
            f[i] = 1.0;
        }
        1 => {
            let m = rng.random_range(1..=dim);
            let start = rng.random_range(0..=dim - m);
            for v in &mut f[start..start + m] {
                *v = 1.0;
            }
        }
        2 => {
            let alpha: f64 = rng.random_range(0.0..2.0);
            for (i, v) in f.iter_mut().enumerate() {
                *v = ((i + 1) as f64).powf(-alpha);
            }
        }
        3 => {
            let m = rng.random_range(1..=dim);
            for (i, v) in f.iter_mut().take(m).enumerate() {
                *v = if i % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        4 => {
            let nnz = rng.random_range(1..=dim.min(16));
            for i in random_subset(dim, nnz, rng) {
                f[i] = rng.sample::<f64, _>(StandardNormal);
            }
        }
        _ => f = gaussian_vector(dim, rng),
    }
    f
}
