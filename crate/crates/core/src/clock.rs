/// Monotonic seconds source. The core has no OS access, so callers that want
/// wall times inject one; [`NoClock`] reports zero.
pub trait Clock {
    fn now(&self) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}
