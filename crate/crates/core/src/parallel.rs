//! Deterministic fan-out over indexed work items.
//!
//! Items are split into `workers` contiguous blocks by index, each block runs
//! on its own scoped thread, and results come back in index order. Each item
//! must draw its randomness from a stream keyed by its own index, so the
//! output is independent of `workers`.

/// `f(0), f(1), …, f(count − 1)` evaluated on up to `workers` threads.
pub fn map_indexed<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(count.max(1));
    if workers == 1 {
        return (0..count).map(&f).collect();
    }
    let chunk = count.div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = (w * chunk).min(count);
                let hi = ((w + 1) * chunk).min(count);
                s.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

/// Index range `[lo, hi)` handled by `worker` out of `workers` for `count`
/// items; mirrors the partition used by [`map_indexed`].
pub fn partition(count: usize, workers: usize, worker: usize) -> (usize, usize) {
    let workers = workers.max(1).min(count.max(1));
    let chunk = count.div_ceil(workers);
    ((worker * chunk).min(count), ((worker + 1) * chunk).min(count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let one = map_indexed(103, 1, |i| i * i);
        for w in [2, 3, 7, 200] {
            assert_eq!(map_indexed(103, w, |i| i * i), one);
        }
        assert!(map_indexed(0, 4, |i| i).is_empty());
    }

    #[test]
    fn partition_covers_everything() {
        let (count, workers) = (10, 3);
        let mut covered = vec![];
        for w in 0..workers {
            let (lo, hi) = partition(count, workers, w);
            covered.extend(lo..hi);
        }
        assert_eq!(covered, (0..10).collect::<Vec<_>>());
    }
}
