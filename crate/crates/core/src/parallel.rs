//! Execution backends for the data-parallel loops.
//!
//! With the `parallel` feature the loops run on rayon; without it every
//! [`Execution`] value falls back to a plain iterator. Every helper returns
//! results in input order or reduces integers, so output never depends on
//! scheduling.

use std::ops::Range;

/// Name of the environment variable capping worker threads (0 = auto).
pub const THREADS_ENV: &str = "BOUND_BRIDGE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over an index range, preserving order.
pub fn map_range<R, F>(exec: Execution, range: Range<u64>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            range.into_par_iter().map(f).collect()
        }
        _ => range.map(f).collect(),
    }
}

/// Runs `pick(scratch, i)` for every `i` in `range` and counts how often
/// each bucket in `0..buckets` was returned. `init` builds per-worker
/// scratch space.
pub fn tally<S: Send, I, F>(
    exec: Execution,
    range: Range<u64>,
    buckets: usize,
    init: I,
    pick: F,
) -> Vec<u64>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, u64) -> usize + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            range
                .into_par_iter()
                .fold(
                    || (init(), vec![0u64; buckets]),
                    |(mut scratch, mut counts), i| {
                        counts[pick(&mut scratch, i)] += 1;
                        (scratch, counts)
                    },
                )
                .map(|(_, counts)| counts)
                .reduce(
                    || vec![0u64; buckets],
                    |mut a, b| {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                        a
                    },
                )
        }
        _ => {
            let mut scratch = init();
            let mut counts = vec![0u64; buckets];
            for i in range {
                counts[pick(&mut scratch, i)] += 1;
            }
            counts
        }
    }
}

/// Reads [`THREADS_ENV`]; unset, empty or unparsable means auto.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Runs `f` with at most `threads` workers (0 = rayon's default).
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(f);
            }
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_map_matches_sequential() {
        let items: Vec<u64> = (0..1000).collect();
        let a = map_ordered(Execution::Parallel, &items, |x| x * x);
        let b = map_ordered(Execution::Sequential, &items, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(
            map_range(Execution::Parallel, 0..50, |i| i + 1),
            (1..51).collect::<Vec<_>>()
        );
    }

    #[test]
    fn tally_is_schedule_independent() {
        let pick = |_: &mut (), i: u64| (i.wrapping_mul(2654435761) % 7) as usize;
        let a = tally(Execution::Parallel, 0..100_000, 7, || (), pick);
        let b = with_threads(2, || tally(Execution::Parallel, 0..100_000, 7, || (), pick));
        let c = tally(Execution::Sequential, 0..100_000, 7, || (), pick);
        assert_eq!(a, c);
        assert_eq!(b, c);
        assert_eq!(c.iter().sum::<u64>(), 100_000);
    }
}
