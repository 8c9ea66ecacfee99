//! Integer-nanosecond timestamps.
//!
//! Every window boundary in the feature pipeline is a multiple of the
//! sampling period, so keeping time as an integer makes window membership
//! and inter-arrival sums exact.

use core::fmt;
use core::ops::{Add, Sub};
use core::str::FromStr;

use thiserror::Error;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// Seconds since trace epoch, stored as whole nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Nanos(pub u64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeParseError {
    #[error("empty time value")]
    Empty,
    #[error("invalid time value `{0}`")]
    Invalid(alloc::string::String),
    #[error("time value `{0}` has more than 9 fractional digits")]
    TooPrecise(alloc::string::String),
}

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);

    pub const fn from_secs(s: u64) -> Self {
        Nanos(s * NANOS_PER_SEC)
    }

    pub const fn from_millis(ms: u64) -> Self {
        Nanos(ms * 1_000_000)
    }

    pub const fn from_micros(us: u64) -> Self {
        Nanos(us * 1_000)
    }

    /// Rounds to the nearest nanosecond. Negative and non-finite inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if !(s > 0.0) {
            return Nanos(0);
        }
        Nanos(libm::round(s * NANOS_PER_SEC as f64) as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        (self.0 / NANOS_PER_SEC) as f64 + (self.0 % NANOS_PER_SEC) as f64 * 1e-9
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Nanos {
    type Output = Nanos;
    fn add(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 + rhs.0)
    }
}

impl Sub for Nanos {
    type Output = Nanos;
    fn sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 - rhs.0)
    }
}

/// Prints as decimal seconds with trailing fractional zeros removed,
/// so that parsing the output reproduces the value exactly.
impl fmt::Display for Nanos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = self.0 / NANOS_PER_SEC;
        let mut frac = self.0 % NANOS_PER_SEC;
        if frac == 0 {
            return write!(f, "{secs}");
        }
        let mut width = 9;
        while frac.is_multiple_of(10) {
            frac /= 10;
            width -= 1;
        }
        write!(f, "{secs}.{frac:0width$}")
    }
}

/// Parses a non-negative decimal number of seconds without going through
/// floating point.
impl FromStr for Nanos {
    type Err = TimeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(TimeParseError::Empty);
        }
        let invalid = || TimeParseError::Invalid(s.into());
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(invalid());
        }
        if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(invalid());
        }
        if frac.len() > 9 {
            return Err(TimeParseError::TooPrecise(s.into()));
        }
        let secs: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| invalid())? };
        let mut frac_ns: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| invalid())? };
        for _ in frac.len()..9 {
            frac_ns *= 10;
        }
        secs.checked_mul(NANOS_PER_SEC).and_then(|n| n.checked_add(frac_ns)).map(Nanos).ok_or_else(invalid)
    }
}
