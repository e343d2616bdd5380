//! Concurrency helpers: an ordered parallel map and a counting semaphore.
//! Worker threads may finish in any order, but callers always see results
//! in input order, which keeps every downstream artifact deterministic.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

/// Applies `f` to every item on up to `workers` threads, returning results
/// in the input order. `f` receives the item's index alongside the item.
/// A panic in any worker propagates to the caller.
pub fn par_map_ordered<T, U, F>(items: Vec<T>, workers: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(usize, T) -> U + Sync,
{
    let workers = workers.max(1);
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let queue: Mutex<VecDeque<(usize, T)>> = Mutex::new(items.into_iter().enumerate().collect());
    let slots: Mutex<Vec<Option<U>>> = Mutex::new((0..n).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let next = queue.lock().expect("queue poisoned").pop_front();
                let Some((index, item)) = next else { break };
                let result = f(index, item);
                slots.lock().expect("slots poisoned")[index] = Some(result);
            });
        }
    });

    slots
        .into_inner()
        .expect("slots poisoned")
        .into_iter()
        .map(|slot| slot.expect("every index filled"))
        .collect()
}

/// A plain counting semaphore. Used to cap in-flight requests per endpoint.
pub struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self { permits: Mutex::new(permits), available: Condvar::new() }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn preserves_input_order() {
        let items: Vec<u64> = (0..200).collect();
        let expected: Vec<u64> = items.iter().map(|x| x * 3).collect();
        let got = par_map_ordered(items, 8, |_, x| {
            // Jitter completion order a little.
            std::thread::sleep(std::time::Duration::from_micros(x % 7 * 10));
            x * 3
        });
        assert_eq!(got, expected);
    }

    #[test]
    fn index_matches_item_position() {
        let got = par_map_ordered(vec!["a", "b", "c"], 2, |i, s| format!("{i}:{s}"));
        assert_eq!(got, vec!["0:a", "1:b", "2:c"]);
    }

    #[test]
    fn zero_workers_clamped_to_one() {
        assert_eq!(par_map_ordered(vec![1, 2], 0, |_, x| x + 1), vec![2, 3]);
    }

    #[test]
    fn empty_input() {
        let out: Vec<i32> = par_map_ordered(Vec::<i32>::new(), 4, |_, x| x);
        assert!(out.is_empty());
    }

    #[test]
    #[should_panic]
    fn worker_panic_propagates() {
        par_map_ordered(vec![1, 2, 3], 2, |_, x| {
            if x == 2 {
                panic!("boom");
            }
            x
        });
    }

    #[test]
    fn semaphore_caps_concurrency() {
        let semaphore = Semaphore::new(3);
        let current = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        par_map_ordered((0..64).collect(), 16, |_, _: i32| {
            let _guard = semaphore.acquire();
            let now = current.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(1));
            current.fetch_sub(1, Ordering::SeqCst);
        });
        assert!(peak.load(Ordering::SeqCst) <= 3);
    }
}
