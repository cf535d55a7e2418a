use std::time::{Duration, Instant};

/// Paces the simulator. Times are milliseconds of simulated time since start.
pub trait Clock {
    fn wait_until(&mut self, t_ms: u64);
}

/// Never sleeps. Simulated time advances as fast as the caller steps.
#[derive(Debug, Default, Clone, Copy)]
pub struct VirtualClock;

impl Clock for VirtualClock {
    fn wait_until(&mut self, _t_ms: u64) {}
}

/// Wall-clock pacing, optionally sped up: `factor = 10.0` runs ten times
/// faster than real time.
#[derive(Debug, Clone, Copy)]
pub struct ScaledClock {
    origin: Instant,
    factor: f64,
}

impl ScaledClock {
    pub fn new(factor: f64) -> Self {
        assert!(factor.is_finite() && factor > 0.0, "clock factor must be positive");
        Self { origin: Instant::now(), factor }
    }

    pub fn real_time() -> Self {
        Self::new(1.0)
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

impl Clock for ScaledClock {
    fn wait_until(&mut self, t_ms: u64) {
        let due = self.origin + Duration::from_secs_f64(t_ms as f64 / 1000.0 / self.factor);
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_clock_paces() {
        let mut c = ScaledClock::new(10.0);
        let start = Instant::now();
        c.wait_until(200);
        let took = start.elapsed();
        assert!(took >= Duration::from_millis(19), "{took:?}");
        assert!(took < Duration::from_millis(500), "{took:?}");
    }

    #[test]
    fn virtual_clock_is_instant() {
        let start = Instant::now();
        VirtualClock.wait_until(1_000_000);
        assert!(start.elapsed() < Duration::from_millis(50));
    }
}
