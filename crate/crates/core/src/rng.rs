//! Seed derivation. A single master seed determines every random stream in a
//! run; each consumer asks for its own stream by label and index so that
//! adding draws in one place never shifts draws elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha12Rng;

/// Independent stream for `(master, label, index)`.
pub fn stream(master: u64, label: &str, index: u64) -> SimRng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    SimRng::from_seed(digest)
}

/// Derived per-run seeds for multi-seed sweeps.
pub fn expand_seeds(master: u64, count: usize) -> Vec<u64> {
    use rand::Rng;
    let mut rng = stream(master, "seed-expansion", 0);
    (0..count).map(|_| rng.random::<u64>() >> 11).collect()
}
