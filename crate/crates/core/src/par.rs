//! Execution strategy for the data-parallel loops.
//!
//! Every parallel loop in the crate is an indexed map whose results are
//! collected in index order and reduced sequentially afterwards, so the
//! sequential and rayon paths produce identical floating point results.

/// How indexed maps are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionMode {
    Sequential,
    /// Rayon work stealing. Without the `parallel` feature this silently
    /// runs sequentially.
    Parallel,
}

impl Default for ExecutionMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecutionMode::Parallel
        } else {
            ExecutionMode::Sequential
        }
    }
}

/// `(0..n).map(f).collect()`, possibly in parallel. Output order is always
/// the index order.
pub fn map_indexed<T, F>(mode: ExecutionMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `f` inside a pool with `workers` threads when running in parallel.
/// `None` uses the global pool.
pub fn with_workers<T: Send, F: FnOnce() -> T + Send>(
    mode: ExecutionMode,
    workers: Option<usize>,
    f: F,
) -> T {
    match (mode, workers) {
        #[cfg(feature = "parallel")]
        (ExecutionMode::Parallel, Some(n)) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map(|pool| pool.install(f))
            .unwrap_or_else(|e| panic!("failed to build worker pool: {e}")),
        _ => f(),
    }
}

/// Sequential sum in slice order.
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().sum()
}
