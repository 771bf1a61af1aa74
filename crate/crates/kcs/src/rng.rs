//! Seed derivation. One master seed fans out into independent, stable
//! per-purpose streams so parallel workers and re-runs agree bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derive a ChaCha RNG from a master seed and a list of string tags
/// (e.g. `["nucleus", sample_id, "draw", "3"]`). SHA-256 keyed, so
/// distinct tag paths give independent streams on every platform.
pub fn derive_rng(master: u64, tags: &[&str]) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for tag in tags {
        hasher.update([0x1f]);
        hasher.update(tag.as_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(seed)
}
