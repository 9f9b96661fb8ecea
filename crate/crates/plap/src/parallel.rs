//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) large row loops and independent
//! runs fan out over rayon; without it everything runs sequentially. The
//! per-item arithmetic is identical in both paths, so results are
//! bit-identical regardless of the feature or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Row loops smaller than this many flux evaluations are not worth a fork.
const ROW_PAR_THRESHOLD: usize = 16_384;

/// Fill `out[i] = f(i)`; parallel when `n_items · work_per_item` is large.
pub fn fill_indexed<T, F>(out: &mut [T], work_per_item: usize, f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if out.len().saturating_mul(work_per_item) >= ROW_PAR_THRESHOLD {
            out.par_iter_mut().enumerate().for_each(|(i, slot)| *slot = f(i));
            return;
        }
    }
    let _ = work_per_item;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Map independent work items, preserving order.
pub fn map_runs<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        return items.into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Whether this build fans work out over rayon.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
