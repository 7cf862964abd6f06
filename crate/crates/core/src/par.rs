//! Data-parallel helpers.
//!
//! Every helper takes a [`Parallelism`] so callers (and the benches) can pick
//! the execution strategy at run time. Without the `parallel` feature the
//! parallel strategy silently runs sequentially. Output order always matches
//! input order, so reductions over the results are deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Ordered map over a slice.
#[allow(unused_variables)]
pub fn map<T, U, F>(items: &[T], mode: Parallelism, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Ordered map over `0..n`.
#[allow(unused_variables)]
pub fn map_range<U, F>(n: usize, mode: Parallelism, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Ordered fallible map; the first error in input order wins.
pub fn try_map<T, U, E, F>(items: &[T], mode: Parallelism, f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    map(items, mode, f).into_iter().collect()
}

/// Tree reduction with no ordering guarantee on floating-point sums.
/// Only used in throughput mode.
#[allow(unused_variables)]
pub fn map_reduce_unordered<T, U, F, R>(items: &[T], mode: Parallelism, f: F, identity: U, reduce: R) -> U
where
    T: Sync,
    U: Send + Sync + Clone,
    F: Fn(&T) -> U + Sync + Send,
    R: Fn(U, U) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            return items.par_iter().map(f).reduce(|| identity.clone(), reduce);
        }
    }
    items.iter().map(f).fold(identity, reduce)
}
