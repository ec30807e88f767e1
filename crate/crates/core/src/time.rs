//! UTC timestamps with a fixed textual form, and injectable clocks.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

/// UTC instant, millisecond precision, rendered as `2025-01-01T00:00:00.000Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn from_millis(ms: i64) -> Timestamp {
        Timestamp(Utc.timestamp_millis_opt(ms).single().expect("millisecond timestamp in range"))
    }

    pub fn millis(self) -> i64 {
        self.0.timestamp_millis()
    }

    pub fn now() -> Timestamp {
        Timestamp::from_millis(Utc::now().timestamp_millis())
    }

    pub fn plus_seconds(self, secs: i64) -> Timestamp {
        Timestamp(self.0 + Duration::seconds(secs))
    }

    /// Whole seconds from `earlier` to `self` (negative if `earlier` is later).
    pub fn seconds_since(self, earlier: Timestamp) -> i64 {
        (self.0 - earlier.0).num_seconds()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dt = DateTime::parse_from_rfc3339(s)?;
        Ok(Timestamp::from_millis(dt.with_timezone(&Utc).timestamp_millis()))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp::now()
    }
}

/// Deterministic clock: starts at a fixed instant and advances one step per reading.
#[derive(Debug)]
pub struct StepClock {
    next_ms: AtomicI64,
    step_ms: i64,
}

impl StepClock {
    pub fn new(start: Timestamp, step_secs: i64) -> StepClock {
        StepClock {
            next_ms: AtomicI64::new(start.millis()),
            step_ms: step_secs * 1000,
        }
    }

    /// 2025-01-01T00:00:00Z, one second per reading.
    pub fn fixture() -> StepClock {
        StepClock::new(Timestamp::from_millis(1_735_689_600_000), 1)
    }

    /// Advances as if `readings` timestamps had already been handed out.
    pub fn skip(&self, readings: i64) {
        self.next_ms.fetch_add(readings * self.step_ms, Ordering::SeqCst);
    }
}

impl Clock for StepClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_millis(self.next_ms.fetch_add(self.step_ms, Ordering::SeqCst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_and_parses_utc() {
        let t = Timestamp::from_millis(1_735_689_600_123);
        assert_eq!(t.to_string(), "2025-01-01T00:00:00.123Z");
        assert_eq!("2025-01-01T00:00:00.123Z".parse::<Timestamp>().unwrap(), t);
        assert_eq!("2025-01-01T01:00:00.123+01:00".parse::<Timestamp>().unwrap(), t);
        assert_eq!(serde_json::to_string(&t).unwrap(), "\"2025-01-01T00:00:00.123Z\"");
    }

    #[test]
    fn step_clock_advances() {
        let c = StepClock::fixture();
        let a = c.now();
        let b = c.now();
        assert_eq!(b.seconds_since(a), 1);
        c.skip(3);
        assert_eq!(c.now().seconds_since(b), 4);
    }
}
