use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random orthogonal matrix as rows.
pub fn random_rotation(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = nalgebra::DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    (0..dim).map(|i| (0..dim).map(|j| q[(i, j)]).collect()).collect()
}
