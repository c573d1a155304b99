//! Fixed-point virtual time.
//!
//! All simulated quantities are millisecond-scale, so time is carried as an
//! integer number of microseconds. Integer arithmetic keeps traces
//! byte-reproducible; floats appear only at the reporting boundary.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// A point on (or a span of) the virtual timeline, in microseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Builds a time from whole milliseconds.
    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    /// Builds a time from fractional milliseconds, rounded to 1 µs.
    pub fn from_ms_f64(ms: f64) -> Self {
        SimTime((ms * 1_000.0).round() as u64)
    }

    pub fn from_us(us: u64) -> Self {
        SimTime(us)
    }

    pub fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn max(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.max(rhs.0))
    }

    pub fn min(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.min(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.as_ms_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ms_conversions_round_trip() {
        assert_eq!(SimTime::from_ms(30).as_us(), 30_000);
        assert_eq!(SimTime::from_ms_f64(1.13).as_us(), 1_130);
        assert_eq!(SimTime::from_ms_f64(0.1).as_us(), 100);
    }

    #[test]
    fn ordering_and_arithmetic() {
        let a = SimTime::from_ms(5);
        let b = SimTime::from_ms(3);
        assert!(a > b);
        assert_eq!((a + b).as_us(), 8_000);
        assert_eq!((a - b).as_us(), 2_000);
        assert_eq!(b.saturating_sub(a), SimTime::ZERO);
    }

    #[test]
    fn display_is_millisecond_scaled() {
        assert_eq!(SimTime(1_130).to_string(), "1.130ms");
    }
}
