//! Execution strategy for the grid kernels.
//!
//! Reductions are split into fixed-size chunks whose partial sums are added
//! in index order, so results do not depend on the thread count or on
//! whether the parallel backend is compiled in.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Deterministic sum of `f(i)` for `i in 0..n`.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunk_sum = |c: usize| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        };
        let nchunks = n.div_ceil(CHUNK);
        let partial: Vec<f64> = match self {
            Exec::Sequential => (0..nchunks).map(chunk_sum).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..nchunks).into_par_iter().map(chunk_sum).collect(),
        };
        partial.iter().sum()
    }

    /// Deterministic maximum of `f(i)`; returns 0 for empty ranges.
    pub fn max<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let chunk_max = |c: usize| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).fold(0.0f64, f64::max)
        };
        let nchunks = n.div_ceil(CHUNK);
        match self {
            Exec::Sequential => (0..nchunks).map(chunk_max).fold(0.0, f64::max),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..nchunks)
                .into_par_iter()
                .map(chunk_max)
                .collect::<Vec<_>>()
                .into_iter()
                .fold(0.0, f64::max),
        }
    }

    /// `out[i] = f(i)` for every index.
    pub fn fill<F>(self, out: &mut [f64], f: F)
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        match self {
            Exec::Sequential => out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i)),
            #[cfg(feature = "parallel")]
            Exec::Parallel => out
                .par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(c, block)| {
                    for (j, o) in block.iter_mut().enumerate() {
                        *o = f(c * CHUNK + j);
                    }
                }),
        }
    }

    /// Map independent jobs, keeping input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
        }
    }
}
