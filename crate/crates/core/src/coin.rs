use std::fmt::Debug;

use sha2::{Digest, Sha256};

/// A common coin: every process obtains the same bit for a given
/// `(instance, round)`, and the bit is unpredictable before the round.
pub trait CommonCoin: Debug + Send + Sync {
    fn flip(&self, instance: &[u8], round: u32) -> bool;
}

/// A PRF keyed with a seed distributed at setup. The network scheduler
/// never sees the seed, so it cannot predict flips.
#[derive(Clone, Debug)]
pub struct SharedSeedCoin {
    seed: [u8; 32],
}

impl SharedSeedCoin {
    pub fn new(seed: [u8; 32]) -> Self {
        SharedSeedCoin { seed }
    }

    pub fn from_u64(seed: u64) -> Self {
        SharedSeedCoin { seed: Sha256::digest(seed.to_le_bytes()).into() }
    }
}

impl CommonCoin for SharedSeedCoin {
    fn flip(&self, instance: &[u8], round: u32) -> bool {
        let mut h = Sha256::new();
        h.update(b"privocracy-coin-v1");
        h.update(self.seed);
        h.update((instance.len() as u32).to_le_bytes());
        h.update(instance);
        h.update(round.to_le_bytes());
        h.finalize()[0] & 1 == 1
    }
}
