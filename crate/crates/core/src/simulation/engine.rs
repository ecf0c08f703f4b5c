use rayon::prelude::*;
use rayon::ThreadPool;

use super::SimulationError;

/// Worker pool for independent trials.
///
/// Results always come back in trial order, so any reduction over them is
/// independent of the number of threads.
#[derive(Debug)]
pub struct Engine {
    pool: ThreadPool,
}

impl Engine {
    /// `None` uses one thread per available core.
    pub fn new(threads: Option<usize>) -> Result<Self, SimulationError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            if n == 0 {
                return Err(SimulationError::InvalidArgument(
                    "thread count must be >= 1".into(),
                ));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| {
            SimulationError::InvalidArgument(format!("cannot start worker pool: {e}"))
        })?;
        Ok(Engine { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Runs `f(0), ..., f(n - 1)` in parallel and returns the results in index order.
    pub fn map<T, F>(&self, n: u64, f: F) -> Result<Vec<T>, SimulationError>
    where
        T: Send,
        F: Fn(u64) -> Result<T, SimulationError> + Sync + Send,
    {
        self.pool
            .install(|| (0..n).into_par_iter().map(&f).collect())
    }
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(None).expect("default worker pool")
    }
}
