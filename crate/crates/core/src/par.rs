//! Data-parallel reductions with a deterministic combine order.
//!
//! Every reduction splits the index range into fixed-size chunks, reduces each
//! chunk sequentially and then combines the chunk results in index order. The
//! floating-point result is therefore identical whether the chunks run on a
//! rayon pool, on one thread, or with the `parallel` feature disabled.

use std::sync::atomic::{AtomicBool, Ordering};

/// Chunk length for all reductions. Changing it changes rounding.
pub const CHUNK: usize = 2048;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path at runtime (used by the benchmark suite).
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn is_sequential() -> bool {
    !cfg!(feature = "parallel") || FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Cap the global pool at `workers` threads. Only the first call takes effect;
/// returns whether this call configured the pool.
pub fn set_workers(workers: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        false
    }
}

fn chunk_ranges(len: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(len)))
        .collect()
}

/// Map every chunk `[lo, hi)` to a value, returning the values in chunk order.
pub fn map_chunks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync + Send,
{
    let ranges = chunk_ranges(len);
    #[cfg(feature = "parallel")]
    {
        if !is_sequential() {
            use rayon::prelude::*;
            return ranges.into_par_iter().map(|(lo, hi)| f(lo, hi)).collect();
        }
    }
    ranges.into_iter().map(|(lo, hi)| f(lo, hi)).collect()
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(len, |lo, hi| (lo..hi).map(&f).sum::<f64>())
        .into_iter()
        .sum()
}

/// Maximum of `f(i)` over `0..len`; `f64::NEG_INFINITY` when empty. NaN values are ignored.
pub fn max<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_chunks(len, |lo, hi| {
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// Componentwise sum of vector-valued `f` writing into an accumulator of length `dim`.
pub fn sum_vec<F>(len: usize, dim: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let parts = map_chunks(len, |lo, hi| {
        let mut acc = vec![0.0; dim];
        for i in lo..hi {
            f(i, &mut acc);
        }
        acc
    });
    let mut out = vec![0.0; dim];
    for p in parts {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// Ordered collect of `f(i)` for `0..len`.
pub fn collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_chunks(len, |lo, hi| (lo..hi).map(&f).collect::<Vec<T>>())
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        set_sequential(false);
        let a = sum(100_003, f);
        set_sequential(true);
        let b = sum(100_003, f);
        set_sequential(false);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn empty_reductions() {
        assert_eq!(sum(0, |_| 1.0), 0.0);
        assert_eq!(max(0, |_| 1.0), f64::NEG_INFINITY);
        assert!(collect(0, |i| i).is_empty());
    }

    #[test]
    fn vector_sum_matches_scalar_sums() {
        let v = sum_vec(5000, 2, |i, acc| {
            acc[0] += i as f64;
            acc[1] += 1.0;
        });
        assert_eq!(v, vec![(4999.0 * 5000.0) / 2.0, 5000.0]);
    }
}
