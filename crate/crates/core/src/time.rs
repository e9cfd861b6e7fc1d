//! Epoch-second time constants and calendar decomposition.

use chrono::{DateTime, Datelike};

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;

pub const HOUR: i64 = 3_600;
pub const DAY: i64 = 86_400;
pub const WEEK: i64 = 7 * DAY;

/// Calendar fields of a timestamp as used by the temporal features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarParts {
    /// 0 = Monday .. 6 = Sunday.
    pub day_of_week: u32,
    /// 1..=12
    pub month: u32,
    /// 1..=31
    pub day_of_month: u32,
}

pub fn calendar(ts: Timestamp) -> CalendarParts {
    // Out-of-range timestamps are clamped to the epoch; chrono covers +/- 262k years
    // so this only triggers on corrupt input that validation already rejects.
    let dt = DateTime::from_timestamp(ts, 0).unwrap_or(DateTime::UNIX_EPOCH);
    CalendarParts {
        day_of_week: dt.weekday().num_days_from_monday(),
        month: dt.month(),
        day_of_month: dt.day(),
    }
}

pub fn days(n: f64) -> i64 {
    (n * DAY as f64).round() as i64
}
