//! Deterministic seed derivation for per-sequence / per-frame / per-object
//! random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combine a base seed with a path of identifiers into one 64-bit seed.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

pub fn rng(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, path))
}

/// Counter-based uniform in `[0, 1)`: the same `(key, index)` always gives
/// the same value, independent of evaluation order.
pub fn uniform(key: u64, index: u64) -> f64 {
    (derive(key, &[index]) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based standard normal (Box-Muller on two counter uniforms).
pub fn normal(key: u64, index: u64) -> f64 {
    let u1 = 1.0 - uniform(key, 2 * index);
    let u2 = uniform(key, 2 * index + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Stream tags so different consumers of the same ids never share a stream.
pub mod stream {
    pub const SCENE: u64 = 1;
    pub const DEPTH_NOISE: u64 = 2;
    pub const DETECTOR: u64 = 3;
    pub const COMPLETION: u64 = 4;
    pub const FLIP: u64 = 5;
    pub const NOC_NOISE: u64 = 6;
}
