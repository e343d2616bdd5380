//! Client-side rate limiting over a sliding window, with time abstracted
//! behind a [`Clock`] so the limiter can be tested without real waiting.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
    fn sleep(&self, duration: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn sleep(&self, duration: Duration) {
        std::thread::sleep(duration);
    }
}

/// A clock that only moves when told to. `sleep` advances it, so code
/// that waits on this clock completes instantly in tests.
pub struct ManualClock {
    base: Instant,
    offset: Mutex<Duration>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self { base: Instant::now(), offset: Mutex::new(Duration::ZERO) }
    }

    pub fn advance(&self, by: Duration) {
        *self.offset.lock().unwrap() += by;
    }
}

impl Default for ManualClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Instant {
        self.base + *self.offset.lock().unwrap()
    }

    fn sleep(&self, duration: Duration) {
        self.advance(duration);
    }
}

/// Permits at most `max` acquisitions inside any sliding window of the
/// given length, blocking (via the clock) until a slot frees up.
pub struct RateLimiter {
    max: usize,
    window: Duration,
    acquired: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(max: usize, window: Duration) -> Self {
        Self { max: max.max(1), window, acquired: Mutex::new(VecDeque::new()) }
    }

    pub fn per_minute(max: usize) -> Self {
        Self::new(max, Duration::from_secs(60))
    }

    pub fn acquire(&self, clock: &dyn Clock) {
        loop {
            let wait = {
                let now = clock.now();
                let mut acquired = self.acquired.lock().unwrap();
                while acquired.front().is_some_and(|&t| t + self.window <= now) {
                    acquired.pop_front();
                }
                if acquired.len() < self.max {
                    acquired.push_back(now);
                    return;
                }
                // Lock released before sleeping so other threads can retry.
                *acquired.front().expect("nonempty at capacity") + self.window - now
            };
            clock.sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every 60s window over the acquisition times must hold at most `max`.
    fn assert_window_invariant(times: &[Instant], max: usize, window: Duration) {
        for (i, &start) in times.iter().enumerate() {
            let in_window = times[i..].iter().take_while(|&&t| t < start + window).count();
            assert!(in_window <= max, "window starting at acquisition {i} holds {in_window}");
        }
    }

    #[test]
    fn sliding_window_respected_without_real_waiting() {
        let clock = ManualClock::new();
        let limiter = RateLimiter::per_minute(5);
        let mut times = Vec::new();
        for _ in 0..17 {
            limiter.acquire(&clock);
            times.push(clock.now());
        }
        assert_window_invariant(&times, 5, Duration::from_secs(60));
        // 17 acquisitions at 5 per minute need to span at least 3 windows.
        let span = *times.last().unwrap() - times[0];
        assert!(span >= Duration::from_secs(120));
    }

    #[test]
    fn burst_below_limit_never_sleeps() {
        let clock = ManualClock::new();
        let limiter = RateLimiter::per_minute(10);
        let start = clock.now();
        for _ in 0..10 {
            limiter.acquire(&clock);
        }
        assert_eq!(clock.now(), start);
    }

    #[test]
    fn slots_free_up_as_the_window_slides() {
        let clock = ManualClock::new();
        let start = clock.now();
        let limiter = RateLimiter::new(2, Duration::from_secs(60));
        limiter.acquire(&clock);
        clock.advance(Duration::from_secs(30));
        limiter.acquire(&clock);
        // Third must wait until the first acquisition leaves the window.
        limiter.acquire(&clock);
        assert_eq!(clock.now() - start, Duration::from_secs(60));
    }

    #[test]
    fn concurrent_acquisitions_hold_the_invariant() {
        let clock = ManualClock::new();
        let limiter = RateLimiter::new(3, Duration::from_secs(60));
        let times = crate::pipeline::par_map_ordered((0..12).collect(), 4, |_, _: i32| {
            limiter.acquire(&clock);
            clock.now()
        });
        let mut sorted = times.clone();
        sorted.sort();
        assert_window_invariant(&sorted, 3, Duration::from_secs(60));
    }
}
