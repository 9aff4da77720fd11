//! Reproducible parallel Monte Carlo.
//!
//! Sample indices are cut into fixed chunks of [`CHUNK`]. Chunk `j` draws from
//! its own ChaCha stream keyed by `(seed, purpose, j)`, chunk results are
//! collected in chunk order and reduced sequentially, so every estimate is
//! bit-identical at any worker count.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const CHUNK: usize = 4096;

/// Purpose tags keep streams of different estimators independent under a
/// shared user seed.
pub mod tag {
    pub const MEASURE: u64 = 1;
    pub const WALK: u64 = 2;
    pub const CHI: u64 = 3;
    pub const VARIANCE: u64 = 4;
    pub const GAMMA: u64 = 5;
    pub const LLT: u64 = 6;
    pub const CLLT: u64 = 7;
    pub const PROBE: u64 = 8;
    pub const EIGEN: u64 = 9;
    pub const LINEARITY: u64 = 10;
    pub const TEMPORAL: u64 = 11;
    pub const LATTICE: u64 = 12;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, purpose: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(purpose)));
    rng.set_stream(stream);
    rng
}

/// Runs `f` on every chunk of `0..n` in parallel; results come back in chunk
/// order.
pub fn chunked<T, F>(n: usize, seed: u64, purpose: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, Range<usize>) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, purpose, j as u64);
            f(&mut rng, j * CHUNK..((j + 1) * CHUNK).min(n))
        })
        .collect()
}

/// Per-sample map flattened in sample order.
pub fn sample_vec<T, F>(n: usize, seed: u64, purpose: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    chunked(n, seed, purpose, |rng, r| r.map(|_| f(rng)).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

/// Pairwise summation; order fixed by the slice, error `O(log n · eps)`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn worker_count_does_not_change_results() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    let v = sample_vec(50_000, 7, tag::MEASURE, |r| r.gen::<f64>());
                    pairwise_sum(&v)
                })
        };
        assert_eq!(run(1).to_bits(), run(8).to_bits());
    }

    #[test]
    fn streams_differ() {
        let a: f64 = stream_rng(1, 1, 0).gen();
        let b: f64 = stream_rng(1, 1, 1).gen();
        let c: f64 = stream_rng(1, 2, 0).gen();
        assert!(a != b && a != c);
    }
}
