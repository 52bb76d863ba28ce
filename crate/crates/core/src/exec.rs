//! Execution strategy for the data-parallel inner loops.
//!
//! Per-flight work inside a tick and independent scenario runs are mapped
//! either across a rayon pool or sequentially. The `parallel` feature
//! compiles the rayon path in (and makes it the default); a runtime toggle
//! lets the bench suite compare both strategies in a single run. Results
//! are collected in input order and every mapped closure is pure, so both
//! strategies produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL_ENABLED: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enable or disable the rayon path at runtime. Without the `parallel`
/// feature this is a no-op and execution is always sequential.
pub fn set_parallel(enabled: bool) {
    PARALLEL_ENABLED.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL_ENABLED.load(Ordering::Relaxed)
}

/// Fine-grained per-item work (zone assessments, tube tests) only pays for
/// pool dispatch beyond this many items; below it the sequential path is
/// both faster and free of scheduler-jitter outliers.
pub const PAR_MIN_ITEMS: usize = 64;

/// Map in input order with the active strategy. Small inputs stay
/// sequential regardless.
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && items.len() >= PAR_MIN_ITEMS {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Map across owned items in input order with the active strategy. Meant
/// for heavyweight units (whole scenario runs), so any plurality goes wide.
pub fn map_ordered_owned<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && items.len() >= 2 {
        return items.into_par_iter().map(f).collect();
    }
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_and_preserve_order() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |x: &u64| x * x + 1;
        let with_default = map_ordered(&items, f);
        set_parallel(false);
        let sequential = map_ordered(&items, f);
        set_parallel(true);
        assert_eq!(with_default, sequential);
        assert_eq!(sequential.len(), 1000);
        assert_eq!(sequential[3], 10);
    }
}
