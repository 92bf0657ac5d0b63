//! Stage-seed derivation: master seed -> per-stage seeds through a hash
//! counter, so stages can be rerun independently and results never depend on
//! execution order or worker count.
//!
//! seed(stage, index) = first 8 LE bytes of SHA-256(master_le || stage || index_le).

use sha2::{Digest, Sha256};

pub fn stage_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(stage.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
