// SPDX-License-Identifier: Apache-2.0

//! Data-parallel map over replication indices.
//!
//! With the `parallel` feature (default) work is spread over the rayon
//! pool; without it every [`Execution`] runs sequentially. Output order is
//! always index order, so results are identical either way.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    /// Parallel when the `parallel` feature is compiled in.
    #[default]
    Auto,
    Sequential,
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }
}

/// `f(scratch, i)` for `i in 0..len`, with one scratch value per worker.
pub fn map_with_scratch<S, T, I, F>(len: usize, exec: Execution, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map_init(&init, |s, i| f(s, i)).collect();
    }
    let _ = exec;
    let mut scratch = init();
    (0..len).map(|i| f(&mut scratch, i)).collect()
}

pub fn map_indices<T, F>(len: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_with_scratch(len, exec, || (), |_, i| f(i))
}
