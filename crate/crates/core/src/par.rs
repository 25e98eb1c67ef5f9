//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature off every call runs sequentially. Results never
//! depend on the execution mode: maps keep input order and reductions break ties
//! by index.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    fn parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Sets the rayon worker count once per process. Later calls are ignored.
pub fn init_workers(n: usize) {
    static DONE: OnceLock<()> = OnceLock::new();
    DONE.get_or_init(|| {
        #[cfg(feature = "parallel")]
        {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
        #[cfg(not(feature = "parallel"))]
        let _ = n;
    });
}

/// Order-preserving map.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if exec.parallel() {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Maximum of `f` over `lo..hi`; ties resolve to the smallest index.
pub fn max_by_blocks<F>(lo: u64, hi: u64, block: u64, f: F) -> (f64, u64)
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    let scan = |a: u64, b: u64| {
        let mut best = (f64::NEG_INFINITY, a);
        for x in a..b {
            let v = f(x);
            if v > best.0 {
                best = (v, x);
            }
        }
        best
    };
    #[cfg(feature = "parallel")]
    let pick = |a: (f64, u64), b: (f64, u64)| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a };
    if hi <= lo {
        return (f64::NEG_INFINITY, lo);
    }
    if cfg!(feature = "parallel") && hi - lo > block {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let blocks = (hi - lo).div_ceil(block);
            return (0..blocks)
                .into_par_iter()
                .map(|b| scan(lo + b * block, (lo + (b + 1) * block).min(hi)))
                .reduce(|| (f64::NEG_INFINITY, u64::MAX), pick);
        }
    }
    scan(lo, hi)
}
