//! Numeric weights carried through the dynamic programs.
//!
//! Tables are generic over [`Weight`] so the same recursion runs in `f64`
//! for production horizons and in exact rationals for the small-horizon
//! oracle regime.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Sub};

use num_traits::{One, ToPrimitive, Zero};

pub type Rational = num_rational::Ratio<i128>;

pub trait Weight:
    Copy
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + AddAssign
    + Send
    + Sync
    + 'static
{
    /// Picks the representation of a probability stored in a law. Returns
    /// `None` when the law carries no exact value and `Self` needs one.
    fn from_prob(value: f64, exact: Option<Rational>) -> Option<Self>;

    fn from_int(i: i64) -> Self;

    fn to_f64(self) -> f64;

    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;
}

impl Weight for f64 {
    fn from_prob(value: f64, _exact: Option<Rational>) -> Option<Self> {
        Some(value)
    }

    fn from_int(i: i64) -> Self {
        i as f64
    }

    fn to_f64(self) -> f64 {
        self
    }

    const EXACT: bool = false;
}

impl Weight for Rational {
    fn from_prob(_value: f64, exact: Option<Rational>) -> Option<Self> {
        exact
    }

    fn from_int(i: i64) -> Self {
        Rational::from_integer(i as i128)
    }

    fn to_f64(self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }

    const EXACT: bool = true;
}

/// Parses "p/q" or an integer into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i128 = n.trim().parse().ok()?;
            let d: i128 = d.trim().parse().ok()?;
            if d == 0 {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => s.parse::<i128>().ok().map(Rational::from_integer),
    }
}

pub fn rational_to_f64(r: Rational) -> f64 {
    <Rational as Weight>::to_f64(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions() {
        assert_eq!(parse_rational("1/9"), Some(Rational::new(1, 9)));
        assert_eq!(parse_rational(" 3 / 6 "), Some(Rational::new(1, 2)));
        assert_eq!(parse_rational("2"), Some(Rational::from_integer(2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn rational_converts_to_float() {
        assert_eq!(rational_to_f64(Rational::new(1, 4)), 0.25);
    }
}
