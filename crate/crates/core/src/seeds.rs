//! Seed derivation. Every random stream in the pipeline is keyed by a tuple of
//! integers so that results do not depend on scheduling order.

use sha2::{Digest, Sha256};

/// Mixes `parts` into one 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// 64-bit digest of a string.
pub fn text_seed(text: &str) -> u64 {
    let d = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Hex sha256 of a string.
pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
