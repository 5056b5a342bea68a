//! Seeded randomness. Every stochastic component of the crate draws from a
//! counter-based ChaCha stream derived from a single 64-bit seed plus a
//! textual label, so independent consumers (initial data, null-condition
//! sampling, inequality batteries) never perturb each other's draws and sweeps
//! can share initial data exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Vec3;

/// FNV-1a hash of the label; used as the ChaCha stream id.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A deterministic sub-stream of the master seed, named by `label`.
pub fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(label));
    rng
}

/// Standard normal via Box-Muller.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// Uniform direction on S^2 from normalized Gaussians.
pub fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform point in the closed unit ball.
pub fn ball_point(rng: &mut impl Rng) -> Vec3 {
    let dir = unit_vector(rng);
    let r: f64 = rng.gen::<f64>().cbrt();
    dir * r
}
