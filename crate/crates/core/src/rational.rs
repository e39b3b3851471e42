//! Exact rational numbers used for exponents.
//!
//! Exponents are kept as reduced `p/q` pairs so that differentiation of
//! `|x|^(p/q)` stays exact and printing round-trips. Real exponents coming
//! from the API are converted to a nearby rational with a documented
//! tolerance (`from_f64`, tolerance 1e-12).

use std::fmt;

use serde::{Deserialize, Serialize};

/// Reduced rational with positive denominator.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rat {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs().max(1)
}

impl Rat {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "rational with zero denominator");
        let s = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Rat {
            num: s * num / g,
            den: s * den / g,
        }
    }

    pub const ZERO: Rat = Rat { num: 0, den: 1 };
    pub const ONE: Rat = Rat { num: 1, den: 1 };

    pub fn integer(n: i64) -> Self {
        Rat { num: n, den: 1 }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// True for integers `>= 0`.
    pub fn is_nonneg_integer(&self) -> bool {
        self.den == 1 && self.num >= 0
    }

    /// True for even integers.
    pub fn is_even_integer(&self) -> bool {
        self.den == 1 && self.num % 2 == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn add(self, other: Rat) -> Rat {
        Rat::new(
            self.num * other.den + other.num * self.den,
            self.den * other.den,
        )
    }

    pub fn sub(self, other: Rat) -> Rat {
        self.add(Rat::new(-other.num, other.den))
    }

    pub fn mul(self, other: Rat) -> Rat {
        Rat::new(self.num * other.num, self.den * other.den)
    }

    pub fn neg(self) -> Rat {
        Rat::new(-self.num, self.den)
    }

    /// Nearest rational within `tol`, by continued fractions.
    ///
    /// Exact halves, quarters etc. are recovered exactly; irrational input is
    /// approximated by the first convergent within the tolerance.
    pub fn from_f64(x: f64, tol: f64) -> Option<Rat> {
        if !x.is_finite() {
            return None;
        }
        if x == x.round() && x.abs() < 9e15 {
            return Some(Rat::integer(x as i64));
        }
        // continued-fraction convergents
        let (mut h0, mut h1): (i128, i128) = (1, x.floor() as i128);
        let (mut k0, mut k1): (i128, i128) = (0, 1);
        let mut frac = x - x.floor();
        for _ in 0..64 {
            if frac.abs() < 1e-18 {
                break;
            }
            let inv = 1.0 / frac;
            let a = inv.floor();
            frac = inv - a;
            let h2 = a as i128 * h1 + h0;
            let k2 = a as i128 * k1 + k0;
            h0 = h1;
            h1 = h2;
            k0 = k1;
            k1 = k2;
            if h1.abs() > i64::MAX as i128 || k1 > i64::MAX as i128 {
                return None;
            }
            let approx = h1 as f64 / k1 as f64;
            if (approx - x).abs() <= tol * (1.0 + x.abs()) {
                return Some(Rat::new(h1 as i64, k1 as i64));
            }
        }
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= tol * (1.0 + x.abs()) {
            Some(Rat::new(h1 as i64, k1 as i64))
        } else {
            None
        }
    }

    /// Parse an exact decimal like `-2`, `0.5`, `2.5e1`, or a `p/q` pair.
    pub fn parse_exact(s: &str) -> Option<Rat> {
        if let Some((p, q)) = s.split_once('/') {
            let num: i64 = p.trim().parse().ok()?;
            let den: i64 = q.trim().parse().ok()?;
            if den == 0 {
                return None;
            }
            return Some(Rat::new(num, den));
        }
        let s = s.trim();
        let (mant, exp) = match s.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i32>().ok()?),
            None => (s, 0),
        };
        let neg = mant.starts_with('-');
        let mant = mant.trim_start_matches(['-', '+']);
        let (int_part, frac_part) = match mant.split_once('.') {
            Some((i, f)) => (i, f),
            None => (mant, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        let digits: String = format!("{int_part}{frac_part}");
        if digits.len() > 18 || !digits.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let mut num: i128 = digits.parse().ok()?;
        if neg {
            num = -num;
        }
        let shift = exp - frac_part.len() as i32;
        let mut den: i128 = 1;
        let mut n = num;
        if shift >= 0 {
            for _ in 0..shift {
                n = n.checked_mul(10)?;
            }
        } else {
            for _ in 0..(-shift) {
                den = den.checked_mul(10)?;
            }
        }
        if n.abs() > i64::MAX as i128 || den > i64::MAX as i128 {
            return None;
        }
        Some(Rat::new(n as i64, den as i64))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_and_normalizes_sign() {
        assert_eq!(Rat::new(2, -4), Rat::new(-1, 2));
        assert_eq!(Rat::new(-3, -6), Rat::new(1, 2));
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(Rat::parse_exact("0.5"), Some(Rat::new(1, 2)));
        assert_eq!(Rat::parse_exact("-2"), Some(Rat::integer(-2)));
        assert_eq!(Rat::parse_exact("2.5e1"), Some(Rat::integer(25)));
        assert_eq!(Rat::parse_exact("1/3"), Some(Rat::new(1, 3)));
        assert_eq!(Rat::parse_exact("0.1"), Some(Rat::new(1, 10)));
    }

    #[test]
    fn from_f64_recovers_small_fractions() {
        assert_eq!(Rat::from_f64(0.5, 1e-12), Some(Rat::new(1, 2)));
        assert_eq!(Rat::from_f64(-1.0, 1e-12), Some(Rat::integer(-1)));
        let r = Rat::from_f64(std::f64::consts::PI, 1e-12).unwrap();
        assert!((r.to_f64() - std::f64::consts::PI).abs() <= 1e-12 * (1.0 + std::f64::consts::PI));
    }
}
