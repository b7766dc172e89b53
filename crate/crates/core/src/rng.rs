//! Seed bookkeeping and deterministic RNG stream derivation.
//!
//! Every random draw in the toolkit comes from a ChaCha8 stream keyed by a
//! master seed and a path of integers, so independent replicates never share
//! state and results do not depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Purpose tags for per-episode streams.
pub mod purpose {
    pub const SCENE: u64 = 0x5343_454e;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const ENV: u64 = 0x454e_5600;
    pub const SEARCH: u64 = 0x5345_4152;
    pub const PERMUTATION: u64 = 0x5045_524d;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const PROBE: u64 = 0x5052_4f42;
    pub const FEATURES: u64 = 0x4645_4154;
}

/// Seeds from which a rollout (or any other randomized result) can be
/// regenerated bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: u64,
    pub episode: u64,
    /// Seed of the policy's frozen coupling features.
    pub feature_seed: Option<u64>,
}

impl SeedRecord {
    pub fn new(master: u64, episode: u64) -> Self {
        Self {
            master,
            episode,
            feature_seed: None,
        }
    }

    pub fn with_feature_seed(mut self, seed: u64) -> Self {
        self.feature_seed = Some(seed);
        self
    }

    pub fn stream(&self, purpose: u64) -> ChaCha8Rng {
        stream(self.master, &[self.episode, purpose])
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a 64-bit key from a master seed and a path.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Independent RNG stream for `(master, path)`.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}

pub fn standard_normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Uniform draw on the unit sphere in `len` dimensions.
pub fn unit_vector<R: rand::Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    loop {
        let mut v = standard_normal_vec(rng, len);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}
