//! Bounded worker pool with an order-preserving map.
//!
//! With the `parallel` feature the map runs on a dedicated rayon pool; without
//! it (or with one worker) items are processed in index order on the calling
//! thread. Results always come back in input order, so any fold over them is
//! independent of the schedule.

/// Environment variable that overrides every other worker-count setting.
pub const WORKERS_ENV: &str = "HTC_WORKERS";

/// Worker count from `HTC_WORKERS`, then `requested`, then the number of
/// available cores.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    let from_env = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    from_env
        .or(requested)
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if workers > 1 && items.len() > 1 {
        return parallel_map(items, workers, f);
    }
    let _ = workers;
    sequential_map(items, f)
}

pub fn sequential_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(usize, &T) -> R,
{
    items.iter().enumerate().map(|(k, t)| f(k, t)).collect()
}

#[cfg(feature = "parallel")]
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().enumerate().map(|(k, t)| f(k, t)).collect()),
        Err(_) => sequential_map(items, f),
    }
}
