//! Named random substreams.
//!
//! A stage seed is the first eight bytes (little-endian) of
//! `SHA-256(seed as u64 LE ‖ stage name as UTF-8)`, and each stage draws from a
//! ChaCha8 generator seeded with it. No stage reads ambient entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const STAGE_SPLIT: &str = "split";
pub const STAGE_INIT: &str = "init";
pub const STAGE_NEGATIVES: &str = "negatives";
pub const STAGE_SGD: &str = "sgd";
pub const STAGE_FIXTURE: &str = "fixture";

pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

pub fn stage_rng(seed: u64, stage: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stage))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_get_distinct_stable_seeds() {
        assert_eq!(derive_seed(42, STAGE_SPLIT), derive_seed(42, STAGE_SPLIT));
        assert_ne!(derive_seed(42, STAGE_SPLIT), derive_seed(42, STAGE_INIT));
        assert_ne!(derive_seed(42, STAGE_SPLIT), derive_seed(43, STAGE_SPLIT));
    }
}
