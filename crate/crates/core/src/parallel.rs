//! Worker-pool sizing. `TEMPOPROJ_THREADS` caps rayon's global pool.

use std::sync::Once;

pub const THREADS_ENV: &str = "TEMPOPROJ_THREADS";

static INIT: Once = Once::new();

/// Thread cap requested through the environment, if any.
pub fn requested_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Builds the global pool honoring `TEMPOPROJ_THREADS`. Idempotent; has no
/// effect if rayon's global pool was already initialized elsewhere.
pub fn init_from_env() {
    INIT.call_once(|| {
        if let Some(n) = requested_threads() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

pub fn current_threads() -> usize {
    rayon::current_num_threads()
}
