//! Trial fan-out with a sequential fallback.
//!
//! Results always come back in index order, and every trial derives its own
//! RNG from `(seed, index)`, so both modes produce bit-identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    /// Uses the rayon pool when the `parallel` feature is on, otherwise
    /// behaves like `Sequential`.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && *self == Execution::Parallel
    }
}

/// `(0..n).map(f)` in the requested mode.
pub fn map_indexed<T, F>(n: usize, mode: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}
