//! Discrete time.
//!
//! All instants and durations are integral tick counts. Continuous-time
//! quantities (and infinitesimal offsets) are represented by scaling the
//! whole system by a constant factor, so every ceiling term stays exact.

use std::fmt;

use serde::{Deserialize, Serialize};

/// An overflowing tick computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("tick arithmetic overflowed")]
pub struct Overflow;

/// A non-negative number of time ticks.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TimeTicks(u64);

impl TimeTicks {
    pub const ZERO: TimeTicks = TimeTicks(0);
    pub const MAX: TimeTicks = TimeTicks(u64::MAX);

    pub const fn new(ticks: u64) -> Self {
        TimeTicks(ticks)
    }

    pub const fn get(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: TimeTicks) -> Result<TimeTicks, Overflow> {
        self.0.checked_add(rhs.0).map(TimeTicks).ok_or(Overflow)
    }

    pub fn checked_sub(self, rhs: TimeTicks) -> Result<TimeTicks, Overflow> {
        self.0.checked_sub(rhs.0).map(TimeTicks).ok_or(Overflow)
    }

    pub fn checked_mul(self, factor: u64) -> Result<TimeTicks, Overflow> {
        self.0.checked_mul(factor).map(TimeTicks).ok_or(Overflow)
    }

    /// `ceil(self / divisor)`; `divisor` must be non-zero.
    pub fn div_ceil(self, divisor: TimeTicks) -> u64 {
        self.0.div_ceil(divisor.0)
    }

    /// Saturating difference, for interval lengths where `rhs` may exceed `self`.
    pub fn saturating_sub(self, rhs: TimeTicks) -> TimeTicks {
        TimeTicks(self.0.saturating_sub(rhs.0))
    }
}

impl From<u64> for TimeTicks {
    fn from(ticks: u64) -> Self {
        TimeTicks(ticks)
    }
}

impl From<TimeTicks> for u64 {
    fn from(t: TimeTicks) -> u64 {
        t.0
    }
}

impl fmt::Display for TimeTicks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Sums tick values, failing on overflow.
pub fn checked_sum<I: IntoIterator<Item = TimeTicks>>(items: I) -> Result<TimeTicks, Overflow> {
    items
        .into_iter()
        .try_fold(TimeTicks::ZERO, |acc, t| acc.checked_add(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_checked() {
        let max = TimeTicks::MAX;
        assert_eq!(max.checked_add(TimeTicks::new(1)), Err(Overflow));
        assert_eq!(
            TimeTicks::new(1).checked_sub(TimeTicks::new(2)),
            Err(Overflow)
        );
        assert_eq!(max.checked_mul(2), Err(Overflow));
        assert_eq!(TimeTicks::new(3).checked_mul(10), Ok(TimeTicks::new(30)));
    }

    #[test]
    fn ceiling_division() {
        assert_eq!(TimeTicks::new(8).div_ceil(TimeTicks::new(6)), 2);
        assert_eq!(TimeTicks::new(12).div_ceil(TimeTicks::new(6)), 2);
        assert_eq!(TimeTicks::new(1).div_ceil(TimeTicks::new(6)), 1);
    }

    #[test]
    fn sums() {
        let ticks = [1, 2, 3].map(TimeTicks::new);
        assert_eq!(checked_sum(ticks), Ok(TimeTicks::new(6)));
        assert_eq!(
            checked_sum([TimeTicks::MAX, TimeTicks::new(1)]),
            Err(Overflow)
        );
    }
}
