//! Execution strategy for the data-parallel loops (pattern sweeps, strategy
//! search, random batches). With the `parallel` feature disabled every
//! strategy runs sequentially.

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
    /// Smallest `k` in `0..end` with `pred(k)`. Independent of how the range is
    /// split across threads.
    pub fn find_first<F>(self, end: u64, pred: F) -> Option<u64>
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..end).into_par_iter().find_first(|&k| pred(k)),
            _ => (0..end).find(|&k| pred(k)),
        }
    }

    /// `f` applied to `0..end`, results in index order.
    pub fn map_range<R, F>(self, end: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..end).into_par_iter().map(f).collect(),
            _ => (0..end).map(f).collect(),
        }
    }

    pub fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn all<F>(self, end: u64, pred: F) -> bool
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..end).into_par_iter().all(pred),
            _ => (0..end).all(pred),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_match_is_global() {
        for exec in [Exec::Sequential, Exec::Parallel] {
            assert_eq!(exec.find_first(100_000, |k| k % 7919 == 7918 || k == 50_000), Some(7918));
            assert_eq!(exec.find_first(10, |_| false), None);
            assert_eq!(exec.map_range(5, |k| k * 2), vec![0, 2, 4, 6, 8]);
            assert!(exec.all(1000, |k| k < 1000));
        }
    }
}
