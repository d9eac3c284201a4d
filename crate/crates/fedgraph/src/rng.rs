//! Deterministic RNG stream derivation.
//!
//! Every randomized stage derives its own stream from the experiment seed plus
//! a label and numeric tags (client id, round, ...). Streams are independent of
//! scheduling order, so concurrent clients draw identical values run-to-run.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derive a named substream. The label keeps unrelated stages from colliding
/// even when their numeric tags happen to match.
pub fn derive_rng(seed: u64, label: &str, tags: &[u64]) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([label.len() as u8]);
    hasher.update(label.as_bytes());
    for t in tags {
        hasher.update(t.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}

/// Standard normal draw via Box–Muller.
pub fn normal(rng: &mut ChaCha12Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Fisher-Yates with our own stream (avoids depending on SliceRandom's
/// algorithm staying stable across rand versions).
pub fn shuffle<T>(v: &mut [T], rng: &mut ChaCha12Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.gen_range(0..=i);
        v.swap(i, j);
    }
}
