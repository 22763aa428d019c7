//! Fork-join helpers. With the `std` feature and more than one thread the
//! loops run on a dedicated rayon pool; otherwise they run in order.

use alloc::vec::Vec;

use crate::error::Result;

#[cfg(feature = "std")]
const MIN_CHUNK: usize = 64;

pub struct Executor {
    threads: usize,
    #[cfg(feature = "std")]
    pool: Option<rayon::ThreadPool>,
}

impl core::fmt::Debug for Executor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Executor").field("threads", &self.threads).finish()
    }
}

impl Executor {
    pub fn serial() -> Self {
        Self {
            threads: 1,
            #[cfg(feature = "std")]
            pool: None,
        }
    }

    #[cfg(feature = "std")]
    pub fn new(threads: usize) -> Result<Self> {
        let threads = threads.max(1);
        if threads == 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::ThreadPool(alloc::format!("{e}")))?;
        Ok(Self {
            threads,
            pool: Some(pool),
        })
    }

    #[cfg(not(feature = "std"))]
    pub fn new(_threads: usize) -> Result<Self> {
        Ok(Self::serial())
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "std")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "std"))]
        {
            false
        }
    }

    pub fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "std")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            pool.install(|| {
                items
                    .par_iter_mut()
                    .with_min_len(MIN_CHUNK)
                    .enumerate()
                    .for_each(|(i, t)| f(i, t))
            });
            return;
        }
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }

    /// Like [`for_each_mut`](Self::for_each_mut) but one task per item, for
    /// coarse items such as per-thread segments.
    pub fn for_each_task_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "std")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            pool.install(|| items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t)));
            return;
        }
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }

    pub fn try_for_each_mut<T, E, F>(&self, items: &mut [T], f: F) -> core::result::Result<(), E>
    where
        T: Send,
        E: Send,
        F: Fn(usize, &mut T) -> core::result::Result<(), E> + Sync + Send,
    {
        #[cfg(feature = "std")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| {
                items
                    .par_iter_mut()
                    .with_min_len(MIN_CHUNK)
                    .enumerate()
                    .try_for_each(|(i, t)| f(i, t))
            });
        }
        items.iter_mut().enumerate().try_for_each(|(i, t)| f(i, t))
    }

    pub fn try_for_each<T, E, F>(&self, items: &[T], f: F) -> core::result::Result<(), E>
    where
        T: Sync,
        E: Send,
        F: Fn(usize, &T) -> core::result::Result<(), E> + Sync + Send,
    {
        #[cfg(feature = "std")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| {
                items
                    .par_iter()
                    .with_min_len(MIN_CHUNK)
                    .enumerate()
                    .try_for_each(|(i, t)| f(i, t))
            });
        }
        items.iter().enumerate().try_for_each(|(i, t)| f(i, t))
    }

    /// Runs `f(segment)` for `segments` independent tasks and collects results in order.
    pub fn map_segments<R, F>(&self, segments: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "std")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..segments).into_par_iter().map(&f).collect());
        }
        (0..segments).map(f).collect()
    }

    /// Parallel sum over `0..n` of `f(i)` as `u64` in arbitrary grouping.
    pub fn count<F>(&self, n: usize, f: F) -> u64
    where
        F: Fn(usize) -> u64 + Sync + Send,
    {
        #[cfg(feature = "std")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..n).into_par_iter().with_min_len(1024).map(&f).sum());
        }
        (0..n).map(f).sum()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::serial()
    }
}
