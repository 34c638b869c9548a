use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Area-uniform points of the annulus sector `radius in [inner, outer]`,
/// `angle in [from, to]` (radians from the Upsilon axis).
pub fn annulus_sector(n: usize, inner: f64, outer: f64, from: f64, to: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = rng.gen_range(inner * inner..=outer * outer).sqrt();
            let a = rng.gen_range(from..=to);
            [r * a.cos(), r * a.sin()]
        })
        .collect()
}

/// Default instance: the outer half of the ball of radius `radius`, kept away
/// from both axes.
pub fn default_atoms(n: usize, radius: f64, seed: u64) -> Vec<[f64; 2]> {
    annulus_sector(n, 0.5 * radius, radius, 15f64.to_radians(), 75f64.to_radians(), seed)
}
