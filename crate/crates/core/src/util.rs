use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `ceil(ratio * n)` for a ratio in (0, 1], clamped to `1..=n`. A small
/// tolerance absorbs binary rounding such as `0.7 * 10 = 7.000000000000001`.
pub fn ceil_ratio(ratio: f64, n: usize) -> usize {
    let raw = (ratio * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n.max(1))
}

/// SplitMix64 finalizer used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream))
}

/// Worker count from `MTLSO_THREADS`; 1 (the default) means sequential.
pub fn threads_from_env() -> usize {
    std::env::var("MTLSO_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Order-preserving map, parallel when `MTLSO_THREADS > 1`.
pub fn par_map<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    let threads = threads_from_env();
    if threads <= 1 {
        return items.into_iter().map(f).collect();
    }
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
        Err(_) => items.into_iter().map(f).collect(),
    }
}
