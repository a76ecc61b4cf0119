//! Replica execution.

use alloc::vec::Vec;

/// Runs `count` independent replicas and returns their results in replica order.
///
/// Implementations may run replicas concurrently, but the output must equal
/// `(0..count).map(job).collect()`.
pub trait Replicas {
    fn run<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs replicas one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Replicas for Sequential {
    fn run<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(job).collect()
    }
}
