//! Seeded random streams.
//!
//! Every stochastic stage draws from its own ChaCha stream derived from a
//! master seed and a stage label, so adding or reordering stages never shifts
//! the draws of another stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StageRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a child seed from a master seed and a label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stage_rng(master: u64, label: &str) -> StageRng {
    rng_from_seed(derive_seed(master, label))
}
