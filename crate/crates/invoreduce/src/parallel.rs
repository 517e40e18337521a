//! Data-parallel helpers. Grid and quadrature loops map over indices with
//! rayon when the `parallel` feature is enabled and fall back to plain
//! iteration otherwise. Reductions stay sequential over the canonical index
//! order, so results are bit-identical in both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..count`, preserving index order in the output.
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Sequential variant of [`map_indexed`], available regardless of features.
/// Benchmarks use it as the baseline against the parallel path.
pub(crate) fn map_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Caps the global rayon pool from `INVOREDUCE_THREADS` (0 or unset = auto).
/// Does nothing when the pool is already initialized or the feature is off.
pub fn configure_thread_pool_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(value) = std::env::var("INVOREDUCE_THREADS") {
            if let Ok(threads) = value.trim().parse::<usize>() {
                if threads > 0 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build_global();
                }
            }
        }
    }
}
