use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maps `f` over `0..count`, keeping input order. `workers <= 1` runs inline;
/// otherwise a dedicated pool of that size is used. Output is identical either
/// way as long as `f` depends only on its index.
pub(crate) fn map_indexed<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}
