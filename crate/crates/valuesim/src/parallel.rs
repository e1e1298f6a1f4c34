//! Bounded-worker parallel mapping with input-order results.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};

/// Apply `f` to every item on up to `workers` scoped threads, returning
/// results in input order. When multiple items fail, the error of the
/// earliest input index is returned, so failures are deterministic.
pub fn parallel_map<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync,
{
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".to_string()));
    }
    let n = items.len();
    let slots: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<Result<R>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let item = slots[i].lock().unwrap().take().expect("each slot taken once");
                let result = f(item);
                *results[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut out = Vec::with_capacity(n);
    for slot in results {
        out.push(slot.into_inner().unwrap().expect("every slot filled")?);
    }
    Ok(out)
}
