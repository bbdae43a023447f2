//! Time sources for trace timing. Real runs read the system clock; scripted
//! runs use a counting clock so traces serialize byte-identically no matter
//! when or on which worker thread they were produced.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

/// Monotonic-enough millisecond source for stamping trace steps.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Wall clock, milliseconds since the Unix epoch.
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock: starts at `start` and advances by `step` on every
/// read. Each question gets a fresh instance, so identical work yields
/// identical stamps regardless of scheduling.
pub struct StepClock {
    start: u64,
    step: u64,
    reads: AtomicU64,
}

impl StepClock {
    pub fn new(start: u64, step: u64) -> Self {
        StepClock {
            start,
            step,
            reads: AtomicU64::new(0),
        }
    }
}

impl Clock for StepClock {
    fn now_ms(&self) -> u64 {
        let n = self.reads.fetch_add(1, Ordering::Relaxed);
        self.start + n * self.step
    }
}

/// Recipe for making per-question clocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockFactory {
    System,
    Step { start: u64, step: u64 },
}

impl ClockFactory {
    pub fn make(&self) -> Box<dyn Clock> {
        match self {
            ClockFactory::System => Box::new(SystemClock),
            ClockFactory::Step { start, step } => Box::new(StepClock::new(*start, *step)),
        }
    }
}
