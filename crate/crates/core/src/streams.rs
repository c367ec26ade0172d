//! Deterministic random streams for parallel Monte Carlo.
//!
//! Trials are cut into fixed-size blocks and block `b` always draws from
//! ChaCha stream `b + 1` of the master seed (stream 0 is left for setup
//! draws). The partition depends only on the trial count, so results are
//! identical whatever the thread count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const TRIALS_PER_BLOCK: u64 = 8192;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rng reserved for draws made before the trial loop.
pub fn setup_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0)
}

/// Runs `block(rng, n)` over consecutive trial blocks in parallel and returns
/// the per-block results in block order.
pub fn run_blocks<T, F>(trials: u64, seed: u64, block: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let blocks = trials.div_ceil(TRIALS_PER_BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * TRIALS_PER_BLOCK;
            let n = TRIALS_PER_BLOCK.min(trials - start);
            let mut rng = stream_rng(seed, b + 1);
            block(&mut rng, n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn blocks_are_deterministic_and_sized() {
        let sizes = run_blocks(20_000, 7, |_, n| n);
        assert_eq!(sizes, vec![8192, 8192, 3616]);
        let a = run_blocks(20_000, 7, |rng, n| (0..n).map(|_| rng.random::<u32>() as u64).sum::<u64>());
        let b = run_blocks(20_000, 7, |rng, n| (0..n).map(|_| rng.random::<u32>() as u64).sum::<u64>());
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ() {
        let x: u64 = stream_rng(1, 1).random();
        let y: u64 = stream_rng(1, 2).random();
        let z: u64 = stream_rng(2, 1).random();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn independent_of_thread_count() {
        let f = |rng: &mut ChaCha8Rng, n: u64| (0..n).map(|_| rng.random_range(0..10u64)).sum::<u64>();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_blocks(50_000, 3, f));
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_blocks(50_000, 3, f));
        assert_eq!(single, many);
    }
}
