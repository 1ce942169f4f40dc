//! Execution strategy for the data-parallel loops of the crate.
//!
//! Every batch loop (sample-gradient accumulation, grid quadrature, sweeps over
//! seeds or depths) goes through [`Exec`]. With the `parallel` feature the
//! default is [`Exec::Parallel`], backed by rayon; without it every call runs on
//! the current thread. Results are identical in both modes: reductions are
//! performed over fixed-size chunks whose partial results are combined in
//! index order.

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
    /// True when this mode will actually fan out to a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Map `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Map `f` over the index range `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Apply `f` to consecutive chunks of `items` (each at most `chunk` long)
    /// and return the per-chunk results in chunk order.
    pub fn map_chunks<T, R, F>(self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &[T]) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            return items
                .par_chunks(chunk)
                .enumerate()
                .map(|(i, c)| f(i * chunk, c))
                .collect();
        }
        items
            .chunks(chunk)
            .enumerate()
            .map(|(i, c)| f(i * chunk, c))
            .collect()
    }

    /// Deterministic sum of `f(i)` for `i in 0..n`: partial sums over fixed
    /// blocks are added left to right, so both modes give the same bits.
    pub fn sum_range<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        const BLOCK: usize = 4096;
        let blocks = n.div_ceil(BLOCK);
        let partial = self.map_range(blocks, |b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        });
        partial.into_iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let a = Exec::Sequential.sum_range(100_003, f);
        let b = Exec::Parallel.sum_range(100_003, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn map_chunks_reports_offsets() {
        let v: Vec<u32> = (0..10).collect();
        let offs = Exec::default().map_chunks(&v, 4, |off, c| (off, c.len()));
        assert_eq!(offs, vec![(0, 4), (4, 4), (8, 2)]);
    }
}
