//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon when the caller asks
//! for it; without the feature every helper runs sequentially and the
//! `parallel` argument is ignored. Results are always returned in input
//! order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether this build can run anything in parallel.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}

pub fn map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

pub fn map_range<R, F>(n: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Calls `f(row_index, row)` for every `stride`-wide row of `buf`.
pub fn for_each_row<F>(buf: &mut [f64], stride: usize, parallel: bool, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        buf.par_chunks_mut(stride).enumerate().for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = parallel;
    buf.chunks_mut(stride).enumerate().for_each(|(i, row)| f(i, row));
}

/// Runs `f` on a pool with `threads` workers (global pool when `None`).
pub fn with_threads<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_both_ways() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map(&items, false, |x| x * x);
        let par = map(&items, true, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(map_range(5, true, |i| i + 1), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn rows_are_visited_once() {
        let mut buf = vec![0.0; 12];
        for_each_row(&mut buf, 3, true, |i, row| row.iter_mut().for_each(|v| *v += i as f64));
        assert_eq!(buf, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 3.0, 3.0]);
    }

    #[test]
    fn single_thread_pool() {
        assert_eq!(with_threads(Some(1), || 7), 7);
    }
}
