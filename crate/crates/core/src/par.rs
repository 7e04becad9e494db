//! Deterministic data-parallel helpers: results are collected in index order
//! and reduced sequentially, so sums do not depend on the thread count.

use rayon::prelude::*;

/// Below this many items the sequential path is faster than spawning work.
pub(crate) const PAR_THRESHOLD: usize = 4096;

pub(crate) fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}
