//! Deterministic RNG streams keyed by `(seed, key…)`.
//!
//! Every stochastic draw (shot sampling, MC moves, shuffles) comes from a
//! stream derived from the global seed plus the identity of the draw, never
//! from a shared generator. Results therefore do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Generator for the stream identified by `keys` under `seed`.
pub fn stream(seed: u64, keys: &[u64]) -> Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for k in keys {
        h.update(k.to_le_bytes());
    }
    let digest = h.finalize();
    let mut s = [0u8; 32];
    s.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(s)
}
