//! Platform-stable hashing. Cache keys, content addresses, and the seeded
//! mock backends all need hashes that never vary across runs, processes,
//! or architectures, so everything here bottoms out in SHA-256 rather than
//! `std::hash`.

use sha2::{Digest, Sha256};

/// Hex digest of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collapses a sequence of string parts into one u64. Each part is length
/// prefixed before hashing so `["ab", "c"]` and `["a", "bc"]` differ.
pub fn stable_u64(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Maps string parts to a deterministic value in `[0, 1)`.
pub fn unit_interval(parts: &[&str]) -> f64 {
    stable_u64(parts) as f64 / (u64::MAX as f64 + 1.0)
}
