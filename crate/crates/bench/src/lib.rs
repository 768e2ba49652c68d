//! Shared fixtures for the benchmarks.

use capsim::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two `n × n` uniform[-1, 1] matrices from a fixed seed.
pub fn pair(n: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::random_uniform(n, n, &mut rng);
    let b = Matrix::random_uniform(n, n, &mut rng);
    (a, b)
}
