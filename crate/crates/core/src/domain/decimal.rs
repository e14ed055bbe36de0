//! Fixed-point decimal with four fractional digits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const SCALE: i64 = 10_000;
const FRACTION_DIGITS: usize = 4;

/// A decimal amount stored as an integer count of 1/10000 units.
///
/// All monetary comparisons in labeling go through this type, so equality
/// and ordering are exact. The canonical text form always carries four
/// fractional digits (`"102.5000"`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed4(i64);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecimalError {
    #[error("empty decimal")]
    Empty,
    #[error("malformed decimal {0:?}")]
    Malformed(String),
    #[error("decimal {0:?} has more than 4 fractional digits")]
    TooPrecise(String),
    #[error("decimal {0:?} out of range")]
    Overflow(String),
}

impl Fixed4 {
    pub const ZERO: Fixed4 = Fixed4(0);

    pub const fn from_raw(units: i64) -> Self {
        Fixed4(units)
    }

    pub fn from_int(value: i64) -> Self {
        Fixed4(value * SCALE)
    }

    /// Raw count of 1/10000 units.
    pub const fn raw(self) -> i64 {
        self.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn checked_add(self, other: Fixed4) -> Option<Fixed4> {
        self.0.checked_add(other.0).map(Fixed4)
    }

    pub fn checked_sub(self, other: Fixed4) -> Option<Fixed4> {
        self.0.checked_sub(other.0).map(Fixed4)
    }

    pub fn abs(self) -> Fixed4 {
        Fixed4(self.0.abs())
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }
}

impl FromStr for Fixed4 {
    type Err = DecimalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        if text.is_empty() {
            return Err(DecimalError::Empty);
        }
        let (negative, unsigned) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_part, frac_part) = match unsigned.split_once('.') {
            Some((i, f)) => (i, f),
            None => (unsigned, ""),
        };
        let digits_only = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if int_part.is_empty()
            || !digits_only(int_part)
            || !digits_only(frac_part)
            || (unsigned.contains('.') && frac_part.is_empty())
        {
            return Err(DecimalError::Malformed(s.to_string()));
        }
        if frac_part.len() > FRACTION_DIGITS {
            return Err(DecimalError::TooPrecise(s.to_string()));
        }
        let overflow = || DecimalError::Overflow(s.to_string());
        let int: i64 = int_part.parse().map_err(|_| overflow())?;
        let mut frac: i64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| overflow())?
        };
        for _ in frac_part.len()..FRACTION_DIGITS {
            frac *= 10;
        }
        let units = int
            .checked_mul(SCALE)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(overflow)?;
        Ok(Fixed4(if negative { -units } else { units }))
    }
}

impl fmt::Display for Fixed4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let magnitude = self.0.unsigned_abs();
        let scale = SCALE as u64;
        write!(f, "{sign}{}.{:04}", magnitude / scale, magnitude % scale)
    }
}

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fixed4 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
