//! Execution mode for the data-parallel loops.
//!
//! Every parallel entry point takes an [`Exec`]. `Exec::Parallel` uses rayon
//! when the crate is built with the `parallel` feature; without it both modes
//! run sequentially, so callers never need their own `cfg` gates.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Order-preserving map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Order-preserving fallible map; the first error in input order wins.
    pub fn try_map<T, U, E, F>(self, items: &[T], f: F) -> Result<Vec<U>, E>
    where
        T: Sync,
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }

    /// Runs `f` on a pool of `jobs` worker threads (0 = rayon default).
    pub fn install<R: Send>(self, jobs: usize, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(not(feature = "parallel"))]
        let _ = jobs;
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel if jobs > 0 => match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                Ok(pool) => pool.install(f),
                Err(e) => {
                    log::warn!("could not build a {jobs}-thread pool ({e}); using the global pool");
                    f()
                }
            },
            _ => f(),
        }
    }
}
