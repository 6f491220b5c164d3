//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature, work runs on rayon; `Execution::workers` bounds
//! the pool size. Results always come back in input order, so callers see the
//! same output regardless of worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Plain iterator on the calling thread.
    Sequential,
    /// Rayon pool; `None` uses the global pool.
    #[default]
    Parallel,
    /// Rayon pool limited to this many threads.
    Workers(usize),
}

impl Execution {
    pub fn from_workers(workers: Option<usize>) -> Self {
        match workers {
            None => Execution::Parallel,
            Some(0) | Some(1) => Execution::Sequential,
            Some(n) => Execution::Workers(n),
        }
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Workers(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(_) => (0..n).map(f).collect(),
            },
            #[cfg(not(feature = "parallel"))]
            _ => (0..n).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let f = |i: usize| (i * 7919) % 104_729;
        let seq = Execution::Sequential.map_indexed(10_000, f);
        assert_eq!(Execution::Parallel.map_indexed(10_000, f), seq);
        assert_eq!(Execution::Workers(3).map_indexed(10_000, f), seq);
    }

    #[test]
    fn worker_flag_mapping() {
        assert_eq!(Execution::from_workers(None), Execution::Parallel);
        assert_eq!(Execution::from_workers(Some(1)), Execution::Sequential);
        assert_eq!(Execution::from_workers(Some(8)), Execution::Workers(8));
    }
}
