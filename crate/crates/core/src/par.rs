//! Parallel-or-sequential mapping over independent work items.
//!
//! Candidate evaluation in the search loops is a pure function of its
//! inputs, so the results can be computed on a rayon pool and merged in
//! index order without affecting determinism. Disabling the `parallel`
//! feature swaps in a plain sequential loop with the same semantics.

/// Maps `f` over `items`, returning results in input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Maps `f` over `items`, returning results in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Caps the rayon worker pool from the `SSR_THREADS` environment variable.
///
/// No-op when the variable is unset, unparsable, or the pool was already
/// initialized. Without the `parallel` feature there is no pool to cap.
pub fn init_threads_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("SSR_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
            }
        }
    }
}
