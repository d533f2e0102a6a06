//! Slice-parallel execution.
//!
//! Every Fourier-domain algorithm in this crate is a map over independent
//! frontal slices. [`Executor`] runs that map either inline or on a bounded
//! rayon pool and always returns results ordered by slice index, so output
//! never depends on the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

#[derive(Clone)]
pub struct Executor {
    pool: Option<Arc<ThreadPool>>,
    workers: usize,
    exploit_symmetry: bool,
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers)
            .field("exploit_symmetry", &self.exploit_symmetry)
            .finish()
    }
}

impl Executor {
    pub fn sequential() -> Self {
        Executor {
            pool: None,
            workers: 1,
            exploit_symmetry: true,
        }
    }

    /// An executor backed by a dedicated pool of `workers` threads.
    /// `workers <= 1` runs everything on the calling thread.
    pub fn new(workers: usize) -> Self {
        if workers <= 1 {
            return Self::sequential();
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("rtsvd-worker-{i}"))
            .build()
            .expect("failed to spawn worker pool");
        Executor {
            pool: Some(Arc::new(pool)),
            workers,
            exploit_symmetry: true,
        }
    }

    /// Toggle conjugate-symmetry exploitation. When disabled every Fourier
    /// slice is computed independently instead of mirrored.
    pub fn with_symmetry(mut self, on: bool) -> Self {
        self.exploit_symmetry = on;
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn exploits_symmetry(&self) -> bool {
        self.exploit_symmetry
    }

    /// Number of Fourier slices that must actually be computed for tube
    /// length `n3`; the rest are conjugate mirrors.
    pub(crate) fn slice_count(&self, n3: usize) -> usize {
        if self.exploit_symmetry {
            n3 / 2 + 1
        } else {
            n3
        }
    }

    /// Map `f` over `0..n`, results in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }

    /// Run `f` inside the pool, so nested `map` calls share its workers.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            None => f(),
            Some(pool) => pool.install(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let seq = Executor::sequential().map(100, |i| i * i);
        let par = Executor::new(4).map(100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(par[7], 49);
    }

    #[test]
    fn slice_count_honours_symmetry_flag() {
        let e = Executor::sequential();
        assert_eq!(e.slice_count(8), 5);
        assert_eq!(e.slice_count(7), 4);
        assert_eq!(e.slice_count(1), 1);
        assert_eq!(e.with_symmetry(false).slice_count(8), 8);
    }
}
