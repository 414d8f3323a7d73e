#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Half-width of uniform noise with variance 0.1.
pub const NOISE_HALF_WIDTH: f64 = 0.547_722_557_505_166_1;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Four equal segments cycling through the vertices of the 3-simplex.
pub fn four_segment_truth(horizon: usize) -> Vec<Vec<f64>> {
    let levels = [
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
        vec![1.0, 0.0, 0.0],
    ];
    (0..horizon).map(|t| levels[(4 * t / horizon).min(3)].clone()).collect()
}

pub fn constant_truth(horizon: usize) -> Vec<Vec<f64>> {
    vec![vec![0.2, 0.3, 0.5]; horizon]
}

/// Adds i.i.d. uniform noise of variance 0.1 to every coordinate.
pub fn noisy<R: Rng>(truth: &[Vec<f64>], rng: &mut R) -> Vec<Vec<f64>> {
    truth
        .iter()
        .map(|th| {
            th.iter()
                .map(|&x| x + rng.random_range(-NOISE_HALF_WIDTH..NOISE_HALF_WIDTH))
                .collect()
        })
        .collect()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn tse(estimates: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
    estimates.iter().zip(truth).map(|(e, t)| sq_dist(e, t)).sum()
}
