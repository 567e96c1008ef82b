//! Closed UTC time intervals and their union.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::ModelError;

/// Closed interval `[begin, end]`; zero-length ranges are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeRange {
    begin: DateTime<Utc>,
    end: DateTime<Utc>,
}

impl TimeRange {
    pub fn new(begin: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, ModelError> {
        if end < begin {
            return Err(ModelError::InvalidTimeRange);
        }
        Ok(Self { begin, end })
    }

    pub fn instant(at: DateTime<Utc>) -> Self {
        Self { begin: at, end: at }
    }

    pub fn begin(&self) -> DateTime<Utc> {
        self.begin
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.end
    }

    pub fn duration_secs(&self) -> f64 {
        let d = self.end - self.begin;
        d.num_milliseconds() as f64 / 1000.0
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.begin <= t && t <= self.end
    }
}

/// Union of two range sets, coalesced into the minimal sorted list of
/// maximal ranges. Ranges that overlap or touch are joined.
pub fn merge_time_ranges(a: &[TimeRange], b: &[TimeRange]) -> Vec<TimeRange> {
    normalise_ranges(a.iter().chain(b).copied())
}

/// Sorts and coalesces an arbitrary collection of ranges.
pub fn normalise_ranges(ranges: impl IntoIterator<Item = TimeRange>) -> Vec<TimeRange> {
    let mut all: Vec<TimeRange> = ranges.into_iter().collect();
    all.sort_unstable();
    let mut out: Vec<TimeRange> = Vec::with_capacity(all.len());
    for r in all {
        match out.last_mut() {
            Some(last) if last.end >= r.begin => {
                if r.end > last.end {
                    last.end = r.end;
                }
            }
            _ => out.push(r),
        }
    }
    out
}

pub fn total_duration_secs(ranges: &[TimeRange]) -> f64 {
    ranges.iter().map(TimeRange::duration_secs).sum()
}
