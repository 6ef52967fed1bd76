//! Per-state fan-out on scoped threads.

/// Worker count from `ROBUSTMDP_THREADS`, defaulting to 1.
pub fn threads_from_env() -> usize {
    std::env::var("ROBUSTMDP_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// `(0..n).map(f)` split into contiguous chunks over `workers` threads. Each
/// chunk gets its own scratch value from `init`. Output order is by index.
pub fn map_states_with<S, R, I, F>(n: usize, workers: usize, init: I, f: F) -> Vec<R>
where
    R: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize) -> R + Sync,
{
    if workers <= 1 || n < 2 {
        let mut scratch = init();
        return (0..n).map(|i| f(&mut scratch, i)).collect();
    }
    let chunk = n.div_ceil(workers.min(n));
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|start| {
                let (init, f) = (&init, &f);
                scope.spawn(move || {
                    let mut scratch = init();
                    (start..(start + chunk).min(n))
                        .map(|i| f(&mut scratch, i))
                        .collect::<Vec<R>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("state worker panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for workers in [1, 2, 3, 8, 64] {
            let out = map_states_with(17, workers, || 0usize, |_, i| i * i);
            assert_eq!(out, (0..17).map(|i| i * i).collect::<Vec<_>>());
        }
        assert!(map_states_with(0, 4, || (), |_, i| i).is_empty());
    }
}
