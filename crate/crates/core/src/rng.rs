//! Per-chain random streams.
//!
//! Every chain owns its own ChaCha8 stream whose seed is
//! `hash64(seed, chain_index) = splitmix64(seed ^ splitmix64(chain_index))`.
//! Results are therefore identical no matter how chains are scheduled
//! across worker threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub type ChainRng = ChaCha8Rng;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn hash64(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn chain_rng(seed: u64, index: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(hash64(seed, index))
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Runs `count` independent chains, chain `i` driven by `chain_rng(seed, i)`.
/// Output order follows the chain index.
pub fn run_chains<T, F>(count: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChainRng) -> T + Sync + Send,
{
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(seed, i);
            f(i, &mut rng)
        })
        .collect()
}
