//! Deterministic block-parallel execution.
//!
//! Work is cut into fixed-size blocks; block b draws from a ChaCha stream
//! keyed by (seed, b), and per-block results are reduced strictly in block
//! order. Output is therefore byte-identical for any worker count, and the
//! sequential fallback (built with `--no-default-features`) produces exactly
//! the same numbers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const BLOCK_LEN: usize = 4096;

/// How to execute a block map; `Auto` parallelizes when the `parallel`
/// feature is enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Auto,
    Sequential,
}

/// RNG for block `block` of the stream keyed by `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Splits `count` items into blocks, maps each block with its own seeded RNG,
/// and returns the per-block results in block order.
pub fn map_blocks<T, F>(count: usize, seed: u64, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, ChaCha8Rng, usize) -> T + Sync,
{
    let n_blocks = count.div_ceil(BLOCK_LEN);
    let len_of = |b: usize| {
        if b + 1 == n_blocks {
            count - b * BLOCK_LEN
        } else {
            BLOCK_LEN
        }
    };
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Auto {
            use rayon::prelude::*;
            return (0..n_blocks)
                .into_par_iter()
                .map(|b| f(b as u64, block_rng(seed, b as u64), len_of(b)))
                .collect();
        }
    }
    let _ = mode;
    (0..n_blocks)
        .map(|b| f(b as u64, block_rng(seed, b as u64), len_of(b)))
        .collect()
}

/// Maps over indices 0..n (in parallel under `Auto` with the feature on),
/// returning results in index order.
pub fn map_indexed<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if mode == ExecMode::Auto {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(&f).collect();
        }
    }
    let _ = mode;
    (0..n).map(f).collect()
}
