//! Month-granularity calendar types shared across the pipeline.
//!
//! Every series, ledger, and forecast in this crate is month-indexed, so the
//! `YearMonth` type carries most of the calendar arithmetic: ordering,
//! iteration, day counts, and the "months since" offsets used for GP time
//! indices and discounting exponents.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A calendar month, e.g. 2020-03. Serialized as `"YYYY-MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MonthParseError {
    #[error("expected YYYY-MM, got {0:?}")]
    Format(String),
    #[error("month out of range 1-12: {0}")]
    Range(u32),
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, MonthParseError> {
        if !(1..=12).contains(&month) {
            return Err(MonthParseError::Range(month));
        }
        Ok(Self { year, month })
    }

    /// Panicking constructor for literals in code and tests.
    pub fn of(year: i32, month: u32) -> Self {
        Self::new(year, month).expect("valid month literal")
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn first_day(&self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid year-month")
    }

    pub fn last_day(&self) -> NaiveDate {
        self.first_day()
            .checked_add_months(chrono::Months::new(1))
            .expect("in range")
            .pred_opt()
            .expect("in range")
    }

    /// Calendar day count of this month (leap-aware).
    pub fn days(&self) -> u32 {
        self.last_day().day()
    }

    /// Day count under the non-leap-year convention: February is always 28.
    /// Used by the annualization rule so month-length artifacts stay fixed
    /// across years.
    pub fn days_non_leap(&self) -> u32 {
        const DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
        DAYS[(self.month - 1) as usize]
    }

    pub fn next(&self) -> Self {
        if self.month == 12 {
            Self { year: self.year + 1, month: 1 }
        } else {
            Self { year: self.year, month: self.month + 1 }
        }
    }

    pub fn prev(&self) -> Self {
        if self.month == 1 {
            Self { year: self.year - 1, month: 12 }
        } else {
            Self { year: self.year, month: self.month - 1 }
        }
    }

    pub fn plus_months(&self, n: i64) -> Self {
        let total = self.year as i64 * 12 + (self.month as i64 - 1) + n;
        Self {
            year: total.div_euclid(12) as i32,
            month: (total.rem_euclid(12) + 1) as u32,
        }
    }

    /// Signed month count from `earlier` to `self`.
    pub fn months_since(&self, earlier: YearMonth) -> i64 {
        (self.year as i64 * 12 + self.month as i64) - (earlier.year as i64 * 12 + earlier.month as i64)
    }

    /// Same calendar month in a different year.
    pub fn with_year(&self, year: i32) -> Self {
        Self { year, month: self.month }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = MonthParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| MonthParseError::Format(s.to_string()))?;
        let year: i32 = y.parse().map_err(|_| MonthParseError::Format(s.to_string()))?;
        let month: u32 = m.parse().map_err(|_| MonthParseError::Format(s.to_string()))?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// An inclusive, contiguous run of months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthRange {
    pub fn new(start: YearMonth, end: YearMonth) -> Self {
        assert!(start <= end, "month range start after end: {start}..{end}");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        (self.end.months_since(self.start) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, ym: YearMonth) -> bool {
        self.start <= ym && ym <= self.end
    }

    pub fn contains_range(&self, other: &MonthRange) -> bool {
        self.contains(other.start) && self.contains(other.end)
    }

    pub fn iter(&self) -> impl Iterator<Item = YearMonth> + '_ {
        let n = self.len();
        let start = self.start;
        (0..n).map(move |i| start.plus_months(i as i64))
    }

    /// Position of `ym` within the range, if present.
    pub fn index_of(&self, ym: YearMonth) -> Option<usize> {
        self.contains(ym).then(|| ym.months_since(self.start) as usize)
    }

    /// Overlap with another range, if any.
    pub fn intersect(&self, other: &MonthRange) -> Option<MonthRange> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then(|| MonthRange::new(start, end))
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}
