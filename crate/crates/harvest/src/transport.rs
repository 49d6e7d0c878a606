//! HTTP access behind a trait, plus the clock, rate limiter and backoff the
//! client uses. Tests substitute a mock transport and a manual clock.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<Response, TransportError>;
}

/// Blocking HTTP GET over `ureq`; non-2xx statuses are returned, not raised.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Transport for UreqTransport {
    fn get(&self, url: &str) -> Result<Response, TransportError> {
        let mut resp = self
            .agent
            .get(url)
            .header("Accept", "application/ld+json, application/json")
            .call()
            .map_err(|e| TransportError(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_vec().map_err(|e| TransportError(e.to_string()))?;
        Ok(Response { status, body })
    }
}

/// Monotonic time source.
pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// A clock that only advances when slept on.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl ManualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Sliding-window limiter: at most `per_second` requests in any half-open
/// one-second window.
#[derive(Debug)]
pub struct RateLimiter {
    per_window: usize,
    recent: VecDeque<Duration>,
}

const WINDOW: Duration = Duration::from_secs(1);

impl RateLimiter {
    /// A rate below 1 request/s still admits one request per window.
    pub fn new(rate: f64) -> Self {
        RateLimiter { per_window: (rate.floor() as usize).max(1), recent: VecDeque::new() }
    }

    /// Blocks on `clock` until a request may be sent, then records it.
    pub fn acquire(&mut self, clock: &dyn Clock) -> Duration {
        loop {
            let now = clock.now();
            while self.recent.front().is_some_and(|t| now >= *t + WINDOW) {
                self.recent.pop_front();
            }
            if self.recent.len() < self.per_window {
                self.recent.push_back(now);
                return now;
            }
            let oldest = self.recent[0];
            clock.sleep(oldest + WINDOW - now);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backoff {
    pub base: Duration,
    pub cap: Duration,
}

impl Backoff {
    /// Delay before retry number `attempt` (0-based): `base * 2^attempt`,
    /// capped, scaled by a jitter factor in [0.5, 1).
    pub fn delay(&self, attempt: u32, rng: &mut impl Rng) -> Duration {
        let exp = self.base.saturating_mul(1u32.checked_shl(attempt).unwrap_or(u32::MAX));
        exp.min(self.cap).mul_f64(rng.gen_range(0.5..1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn limiter_respects_window_on_manual_clock() {
        let clock = ManualClock::default();
        let mut rl = RateLimiter::new(3.0);
        let stamps: Vec<Duration> = (0..20).map(|_| rl.acquire(&clock)).collect();
        for (i, t) in stamps.iter().enumerate() {
            let in_window = stamps[i..].iter().filter(|u| **u < *t + WINDOW).count();
            assert!(in_window <= 3, "{in_window} requests within 1s of {t:?}");
        }
        // 20 requests at 3/s need at least 6 full windows
        assert!(clock.now() >= Duration::from_secs(6));
    }

    #[test]
    fn fractional_rate_admits_one_per_window() {
        let clock = ManualClock::default();
        let mut rl = RateLimiter::new(0.5);
        let a = rl.acquire(&clock);
        let b = rl.acquire(&clock);
        assert!(b - a >= WINDOW);
    }

    #[test]
    fn backoff_grows_and_caps() {
        let b = Backoff { base: Duration::from_millis(100), cap: Duration::from_millis(1000) };
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        for attempt in 0..10 {
            let d = b.delay(attempt, &mut rng);
            let nominal = Duration::from_millis(100 * (1 << attempt)).min(b.cap);
            assert!(d >= nominal / 2 && d < nominal, "attempt {attempt}: {d:?}");
        }
        assert!(b.delay(40, &mut rng) <= b.cap);
    }
}
