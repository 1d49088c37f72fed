//! Shared fixtures for the criterion benchmarks in `benches/`.

use modtv::graph::Graph;
use modtv::oracles::{erdos_renyi, planted_two_block};

pub fn sparse_er(n: usize) -> Graph {
    // Expected degree about 8, independent of n.
    erdos_renyi(n, (8.0 / n as f64).min(0.5), 1)
}

pub fn planted(n: usize) -> Graph {
    planted_two_block(n, (20.0 / n as f64).min(0.9), (4.0 / n as f64).min(0.1), 2)
}

/// Deterministic pseudo-random vector in [-1, 1].
pub fn test_vector(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
