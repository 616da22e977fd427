//! Running many independent scenarios.
//!
//! Each scenario stays single-threaded and deterministic; only whole runs are
//! spread across threads, so results are identical in both modes and always
//! come back in input order.

use crate::metrics::RunResult;
use crate::sim::{run, Scenario, SimError};

/// Applies `f` to every item on the calling thread.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Applies `f` to every item on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Parallel when the `parallel` feature is enabled, sequential otherwise.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn run_sequential(scenarios: &[Scenario]) -> Vec<Result<RunResult, SimError>> {
    map_sequential(scenarios, run)
}

#[cfg(feature = "parallel")]
pub fn run_parallel(scenarios: &[Scenario]) -> Vec<Result<RunResult, SimError>> {
    map_parallel(scenarios, run)
}

pub fn run_all(scenarios: &[Scenario]) -> Vec<Result<RunResult, SimError>> {
    map(scenarios, run)
}
