//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the maps run on rayon; without it they are
//! plain loops. Results are always collected in index order, so output never
//! depends on scheduling.

/// `(0..n).map(f).collect()`, in parallel when enabled.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Number of worker threads currently available to [`map_indexed`].
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    return 1;
}

/// Runs `f` with at most `threads` workers. `None` keeps the ambient pool.
pub fn with_thread_budget<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = threads {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order_under_any_budget() {
        let seq: Vec<usize> = (0..100).map(|i| i * i).collect();
        for threads in [1, 3, 8] {
            let got = with_thread_budget(Some(threads), || map_indexed(100, |i| i * i));
            assert_eq!(got, seq);
        }
    }
}
