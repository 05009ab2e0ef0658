//! Deterministic parallel map over index ranges.
//!
//! Work is mapped in parallel into an index-ordered `Vec`; callers reduce
//! that vector sequentially, so the result is independent of worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    /// Use the rayon pool when the `parallel` feature is enabled,
    /// otherwise fall back to sequential.
    Parallel,
    Sequential,
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<T, F>(n: usize, exec: Exec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        Exec::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}
