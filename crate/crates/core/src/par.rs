//! Order-preserving map over an index range, parallel with the `parallel` feature.

use alloc::vec::Vec;

#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Like [`map_range`] but stops at the first error.
pub fn try_map_range<R, E, F>(n: usize, f: F) -> core::result::Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> core::result::Result<R, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}
