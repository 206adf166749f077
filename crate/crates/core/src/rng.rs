//! Deterministic substream derivation. Every stochastic object in the crate
//! draws from a ChaCha stream keyed by SHA-256 of (domain tag, seed, lane
//! indices), so ensembles are reproducible per (seed, path index) regardless
//! of scheduling.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Domain separation tags for the independent noise sources.
#[derive(Debug, Clone, Copy)]
pub enum StreamDomain {
    ScalarFbm,
    QFbm,
    JumpTimes,
    Marks,
}

impl StreamDomain {
    fn tag(self) -> u32 {
        match self {
            StreamDomain::ScalarFbm => 1,
            StreamDomain::QFbm => 2,
            StreamDomain::JumpTimes => 3,
            StreamDomain::Marks => 4,
        }
    }
}

/// Derives an independent deterministic stream for (seed, lane_a, lane_b).
/// `lane_a` is typically a path index, `lane_b` a mode index.
pub fn substream(seed: u64, domain: StreamDomain, lane_a: u64, lane_b: u64) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"nsfde-stream-v1");
    hasher.update(domain.tag().to_le_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(lane_a.to_le_bytes());
    hasher.update(lane_b.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}
