//! Trading calendar and trading-day arithmetic.
//!
//! Days are addressed by their ordinal in the calendar. Successor and
//! predecessor are ordinal steps, so a Friday's successor is whatever the
//! calendar lists next (usually Monday).

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalendarError {
    #[error("calendar is empty")]
    Empty,
    #[error("calendar dates not strictly ascending at position {position}: {previous} then {next}")]
    Order {
        position: usize,
        previous: NaiveDate,
        next: NaiveDate,
    },
    #[error("{0} is the last day of the calendar")]
    LastDay(NaiveDate),
    #[error("{0} is the first day of the calendar")]
    FirstDay(NaiveDate),
    #[error("trading day {date} (ordinal {ordinal}) does not belong to this calendar")]
    Mismatch { ordinal: u32, date: NaiveDate },
}

/// A day the exchange is open, tagged with its index in the owning calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TradingDay {
    pub ordinal: u32,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TradingCalendar {
    days: Vec<NaiveDate>,
    index: HashMap<NaiveDate, u32>,
}

impl TradingCalendar {
    pub fn new(days: Vec<NaiveDate>) -> Result<Self, CalendarError> {
        if days.is_empty() {
            return Err(CalendarError::Empty);
        }
        for (position, pair) in days.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(CalendarError::Order {
                    position: position + 1,
                    previous: pair[0],
                    next: pair[1],
                });
            }
        }
        let index = days
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i as u32))
            .collect();
        Ok(Self { days, index })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn first(&self) -> TradingDay {
        self.day(0).expect("calendar is never empty")
    }

    pub fn last(&self) -> TradingDay {
        self.day(self.days.len() as u32 - 1)
            .expect("calendar is never empty")
    }

    pub fn day(&self, ordinal: u32) -> Option<TradingDay> {
        self.days
            .get(ordinal as usize)
            .map(|&date| TradingDay { ordinal, date })
    }

    pub fn lookup(&self, date: NaiveDate) -> Option<TradingDay> {
        self.index
            .get(&date)
            .map(|&ordinal| TradingDay { ordinal, date })
    }

    /// First trading day on or after `date`, if any.
    pub fn on_or_after(&self, date: NaiveDate) -> Option<TradingDay> {
        let pos = self.days.partition_point(|d| *d < date);
        self.day(pos as u32)
    }

    pub fn contains(&self, day: TradingDay) -> bool {
        self.days.get(day.ordinal as usize) == Some(&day.date)
    }

    fn check(&self, day: TradingDay) -> Result<(), CalendarError> {
        if self.contains(day) {
            Ok(())
        } else {
            Err(CalendarError::Mismatch {
                ordinal: day.ordinal,
                date: day.date,
            })
        }
    }

    pub fn next_day(&self, day: TradingDay) -> Result<TradingDay, CalendarError> {
        next_trading_day(day, self)
    }

    pub fn prev_day(&self, day: TradingDay) -> Result<TradingDay, CalendarError> {
        self.check(day)?;
        if day.ordinal == 0 {
            return Err(CalendarError::FirstDay(day.date));
        }
        Ok(self.day(day.ordinal - 1).expect("ordinal in range"))
    }
}

/// Successor of `day` in `calendar`.
pub fn next_trading_day(
    day: TradingDay,
    calendar: &TradingCalendar,
) -> Result<TradingDay, CalendarError> {
    calendar.check(day)?;
    calendar
        .day(day.ordinal + 1)
        .ok_or(CalendarError::LastDay(day.date))
}
