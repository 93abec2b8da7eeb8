use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs per-rank work units either inline or on a thread pool. Results always
/// come back in rank order, so reductions over them are deterministic.
#[derive(Default)]
pub struct Executor {
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn serial() -> Self {
        Executor { pool: None }
    }

    /// `threads <= 1` gives the serial executor.
    pub fn pooled(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Executor { pool: Some(pool) })
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.pool {
            None => f.write_str("Executor::Serial"),
            Some(p) => write!(f, "Executor::Pooled({})", p.current_num_threads()),
        }
    }
}
