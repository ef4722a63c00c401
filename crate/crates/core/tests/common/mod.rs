#![allow(dead_code)]

use aad_hmm::LogEmissionSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Log-emission table with entries uniform in `[-scale, scale]`.
pub fn random_log_b(seed: u64, n_states: usize, n_windows: usize, scale: f64) -> LogEmissionSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flat = (0..n_states * n_windows)
        .map(|_| rng.random_range(-scale..=scale))
        .collect();
    LogEmissionSeries::from_flat(flat, n_states).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
