//! Deterministic per-trial random streams.
//!
//! Every trial gets its own ChaCha stream whose seed is a hash of the master
//! seed, the instance parameters and the trial index, so trials can run in
//! any order (or in parallel) and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::model::SignalModel;

pub type TrialRng = ChaCha8Rng;

/// Seed of one trial. The solver is not part of the hash, so every solver
/// sees the same signal and measurements for a given `(n, m, k, model, trial)`.
pub fn derive_trial_seed(
    master_seed: u64,
    n: usize,
    m: usize,
    k: usize,
    model: &SignalModel,
    trial: usize,
) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(format!("|n={n}|m={m}|k={k}|model={model}|trial={trial}").as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn trial_rng(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}
