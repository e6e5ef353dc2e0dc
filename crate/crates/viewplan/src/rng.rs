//! Named deterministic randomness streams.
//!
//! Every stochastic operation in the crate draws from a `ChaCha8Rng` keyed by
//!
//! ```text
//! stream_key(label, seed, index) = h64(label) ^ seed ^ index
//! ```
//!
//! where `h64` is the first eight bytes of SHA-256, read little-endian. The
//! label is the scene id for candidate generation and a fixed operation name
//! elsewhere, so independent consumers of the same seed cannot collide and
//! every stream is reproducible across platforms and thread counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// First eight bytes of SHA-256 of `label`, little-endian.
pub fn h64(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Key for the stream identified by `(label, seed, index)`.
pub fn stream_key(label: &str, seed: u64, index: u64) -> u64 {
    h64(label) ^ seed ^ index
}

/// Generator for the stream identified by `(label, seed, index)`.
pub fn stream(label: &str, seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(label, seed, index))
}
