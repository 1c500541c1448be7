//! Seed derivation and the data-parallel map used for rollouts and scoring.
//!
//! With the `parallel` feature, [`par_map`] runs on the rayon pool unless
//! parallelism has been switched off at runtime with [`set_parallel`].
//! Results are identical either way: each work item gets its own generator
//! derived from `(master seed, index)`.

use std::sync::atomic::{AtomicBool, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Switch the data-parallel paths on or off. Has no effect without the
/// `parallel` feature.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Cap the worker count of the global pool. Must be called before any
/// parallel work; returns false if the pool was already initialised.
pub fn set_jobs(jobs: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        true
    }
}

/// splitmix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for work item `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_for(master: u64, index: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master, index))
}

/// `(0..n).map(f)`, in parallel when enabled. Output order is by index.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Parallel map over a slice, order preserved.
pub fn par_map_slice<'a, S, T, F>(items: &'a [S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&'a S) -> T + Sync + Send,
{
    par_map(items.len(), |i| f(&items[i]))
}
