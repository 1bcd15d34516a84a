use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Whole-cent USD amount. Ledger arithmetic never leaves the integers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_cents(cents: i64) -> Self {
        Money(cents)
    }

    pub const fn from_dollars(dollars: i64) -> Self {
        Money(dollars * 100)
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn abs(self) -> Money {
        Money(self.0.abs())
    }

    /// Rounds a real cent amount half away from zero.
    pub fn round_cents(cents: f64) -> Money {
        Money(cents.round() as i64)
    }

    /// Truncates a real cent amount toward zero.
    pub fn trunc_cents(cents: f64) -> Money {
        Money(cents.trunc() as i64)
    }

    /// `floor(self × rate)` for a non-negative rate. A tiny epsilon absorbs
    /// binary-fraction noise such as `0.29 × 100 = 28.999…`.
    pub fn mul_floor(self, rate: f64) -> Money {
        Money((self.0 as f64 * rate + 1e-7).floor() as i64)
    }

    /// `round(self × factor)`, half away from zero.
    pub fn mul_round(self, factor: f64) -> Money {
        Money::round_cents(self.0 as f64 * factor)
    }

    /// Rounds to whole dollars, half away from zero (used for table output).
    pub fn round_to_dollars(self) -> i64 {
        let q = self.0 / 100;
        let r = self.0 % 100;
        if r >= 50 {
            q + 1
        } else if r <= -50 {
            q - 1
        } else {
            q
        }
    }

    pub fn min(self, other: Money) -> Money {
        Money(self.0.min(other.0))
    }

    pub fn max(self, other: Money) -> Money {
        Money(self.0.max(other.0))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}${}.{:02}", abs / 100, abs % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid dollar amount {0:?}")]
pub struct ParseMoneyError(String);

/// Parses `"23.75"`, `"$23.75"`, `"-5"` or `"0.5"` exactly, without going through f64.
impl FromStr for Money {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMoneyError(s.to_string());
        let t = s.trim();
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let t = t.strip_prefix('$').unwrap_or(t);
        let (whole, frac) = match t.split_once('.') {
            Some((w, f)) => (w, f),
            None => (t, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(err());
        }
        if frac.len() > 2 || !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let whole: i64 = if whole.is_empty() { 0 } else { whole.parse().map_err(|_| err())? };
        let frac_cents: i64 = match frac.len() {
            0 => 0,
            1 => frac.parse::<i64>().map_err(|_| err())? * 10,
            _ => frac.parse().map_err(|_| err())?,
        };
        let cents = whole.checked_mul(100).and_then(|c| c.checked_add(frac_cents)).ok_or_else(err)?;
        Ok(Money(if neg { -cents } else { cents }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_formats_sign_and_cents() {
        assert_eq!(Money::from_cents(16110).to_string(), "$161.10");
        assert_eq!(Money::from_cents(-500).to_string(), "-$5.00");
        assert_eq!(Money::from_cents(7).to_string(), "$0.07");
    }

    #[test]
    fn parses_dollar_strings_exactly() {
        assert_eq!("23.75".parse::<Money>().unwrap(), Money::from_cents(2375));
        assert_eq!("$579.5".parse::<Money>().unwrap(), Money::from_cents(57950));
        assert_eq!("-5".parse::<Money>().unwrap(), Money::from_cents(-500));
        assert_eq!(".5".parse::<Money>().unwrap(), Money::from_cents(50));
        assert!("1.234".parse::<Money>().is_err());
        assert!("abc".parse::<Money>().is_err());
        assert!("".parse::<Money>().is_err());
    }

    #[test]
    fn mul_floor_absorbs_binary_noise() {
        assert_eq!(Money::from_cents(100).mul_floor(0.29), Money::from_cents(29));
        assert_eq!(Money::from_cents(10000).mul_floor(0.10), Money::from_cents(1000));
        assert_eq!(Money::from_cents(99).mul_floor(0.5), Money::from_cents(49));
    }

    #[test]
    fn whole_dollar_rounding_is_half_away_from_zero() {
        assert_eq!(Money::from_cents(39040).round_to_dollars(), 390);
        assert_eq!(Money::from_cents(11590).round_to_dollars(), 116);
        assert_eq!(Money::from_cents(-150).round_to_dollars(), -2);
    }
}
