//! Thread-pool replica executor.

use ist_core::replicas::Replicas;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Runs replicas on a dedicated rayon pool.
///
/// Every replica owns its seed stream, so the collected results do not depend
/// on the number of threads.
#[derive(Debug)]
pub struct Pool {
    pool: ThreadPool,
}

impl Pool {
    /// A pool with `threads` workers; 0 lets rayon pick one per core.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Pool { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Replicas for Pool {
    fn run<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..count).into_par_iter().map(job).collect())
    }
}
