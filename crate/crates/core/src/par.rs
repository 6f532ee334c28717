//! Data-parallel helpers.
//!
//! With the `parallel` feature these run on the rayon pool; without it they
//! fall back to plain iterators. Every helper collects results into index
//! order, so callers that reduce sequentially over the output get bitwise
//! identical results regardless of thread count.

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map_range<R, F>(len: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R + Sync + Send,
        R: Send,
    {
        (0..len).into_par_iter().map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        F: Fn(&T) -> R + Sync + Send,
        R: Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn with_threads<R, F>(threads: usize, f: F) -> R
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            // Pool construction only fails on OS thread exhaustion; the global
            // pool gives the same answers.
            Err(_) => f(),
        }
    }

    pub fn current_threads() -> usize {
        rayon::current_num_threads()
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_range<R, F>(len: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R + Sync + Send,
        R: Send,
    {
        (0..len).map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        F: Fn(&T) -> R + Sync + Send,
        R: Send,
    {
        items.iter().map(f).collect()
    }

    pub fn with_threads<R, F>(_threads: usize, f: F) -> R
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        f()
    }

    pub fn current_threads() -> usize {
        1
    }
}

/// Maps `f` over `0..len`, returning results in index order.
pub use imp::map_range;
/// Maps `f` over a slice, returning results in slice order.
pub use imp::map_slice;
/// Runs `f` with at most `threads` workers (no-op in sequential builds).
pub use imp::with_threads;
/// Number of workers available to the helpers above.
pub use imp::current_threads;
