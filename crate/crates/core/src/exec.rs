//! Execution strategy for the data-parallel inner loops.
//!
//! Every hot loop in the crate (token counting, pair counting, substring
//! weighting, per-edge alignment, per-word scoring) is a map followed by an
//! associative, commutative reduction of integer counts. [`Exec`] picks
//! whether that runs on the rayon pool or on the calling thread. Results are
//! identical either way; callers sort anything that leaves a hash map.
//!
//! Without the `parallel` feature, [`Exec::Parallel`] silently runs
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Picks a strategy from a worker count; one worker means sequential.
    pub fn with_threads(threads: usize) -> Self {
        if threads <= 1 {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    /// Folds every item into an accumulator, then merges the accumulators.
    #[cfg_attr(not(feature = "parallel"), allow(unused_variables))]
    pub fn fold_reduce<'a, T, A, I, F, R>(self, items: &'a [T], identity: I, fold: F, reduce: R) -> A
    where
        T: Sync,
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(A, &'a T) -> A + Sync + Send,
        R: Fn(A, A) -> A + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().fold(&identity, &fold).reduce(&identity, &reduce),
            _ => items.iter().fold(identity(), fold),
        }
    }

    /// Order-preserving map.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }
}
