//! Exact dyadic rationals `p / 2^q`.
//!
//! Lattice corners, stage endpoints, grid spacings and the cell values of
//! the exact pipeline all live in this ring, so they are carried exactly and
//! only converted to `f64` at the boundary to floating-point code.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest denominator exponent accepted by the parser and constructors.
pub const MAX_EXP: u32 = 100;

/// A dyadic rational `num / 2^exp`, always stored in lowest terms
/// (`exp == 0` or `num` odd).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };
    pub const HALF: Dyadic = Dyadic { num: 1, exp: 1 };

    pub fn new(num: i128, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.reduce();
        d
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic {
            num: n as i128,
            exp: 0,
        }
    }

    /// `2^k` for any integer `k`.
    pub fn pow2(k: i32) -> Self {
        if k >= 0 {
            Dyadic {
                num: 1i128 << k,
                exp: 0,
            }
        } else {
            Dyadic {
                num: 1,
                exp: (-k) as u32,
            }
        }
    }

    fn reduce(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_integer(&self) -> bool {
        self.exp == 0
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 * (-(self.exp as f64)).exp2()
    }

    /// Exact conversion; fails when `x` is not finite or needs more than
    /// [`MAX_EXP`] fractional bits.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Dyadic::ZERO);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mant, e) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), raw_exp - 1075)
        };
        if e >= 0 {
            if e > 70 {
                return None;
            }
            Some(Dyadic::new(sign * (mant << e), 0))
        } else {
            let d = Dyadic::new(sign * mant, (-e) as u32);
            (d.exp <= MAX_EXP).then_some(d)
        }
    }

    /// Multiply by `2^k`.
    pub fn shl(self, k: i32) -> Self {
        if k >= 0 {
            let k = k as u32;
            if self.exp >= k {
                Dyadic::new(self.num, self.exp - k)
            } else {
                Dyadic::new(self.num << (k - self.exp), 0)
            }
        } else {
            Dyadic::new(self.num, self.exp + (-k) as u32)
        }
    }

    /// Largest integer not above the value.
    pub fn floor(&self) -> i128 {
        self.num >> self.exp
    }

    /// `self * 2^level` as an integer, if exact.
    pub fn scaled_integer(&self, level: u32) -> Option<i64> {
        let s = self.shl(level as i32);
        (s.exp == 0 && s.num.abs() < (1i128 << 62)).then_some(s.num as i64)
    }

    fn align(a: Dyadic, b: Dyadic) -> (i128, i128, u32) {
        let e = a.exp.max(b.exp);
        (a.num << (e - a.exp), b.num << (e - b.exp), e)
    }

    pub fn abs(self) -> Self {
        Dyadic {
            num: self.num.abs(),
            exp: self.exp,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Render as `p/2^q` (or `p` for integers).
    pub fn to_literal(&self) -> String {
        self.to_string()
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = Dyadic::align(self, rhs);
        Dyadic::new(a + b, e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = Dyadic::align(self, rhs);
        Dyadic::new(a - b, e)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        Dyadic::new(self.num * rhs.num, self.exp + rhs.exp)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = Dyadic::align(*self, *other);
        a.cmp(&b)
    }
}

impl From<i64> for Dyadic {
    fn from(n: i64) -> Self {
        Dyadic::from_int(n)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

fn parse_int(s: &str, lit: &str) -> Result<i128> {
    let t = s.trim();
    let digits = t.strip_prefix(['+', '-']).unwrap_or(t);
    if digits.is_empty() || digits.len() > 30 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::Dyadic(lit.to_string()));
    }
    t.parse::<i128>()
        .map_err(|_| Error::Dyadic(lit.to_string()))
}

fn exponent_in_range(k: i128, lit: &str) -> Result<i32> {
    if k.unsigned_abs() > MAX_EXP as u128 {
        return Err(Error::Dyadic(lit.to_string()));
    }
    Ok(k as i32)
}

impl FromStr for Dyadic {
    type Err = Error;

    /// Accepted forms: `17`, `-3/2^5`, `15/16`, `2^-9`, `-2^3`, `0.375`.
    /// Decimal literals are accepted only when their value is dyadic.
    fn from_str(lit: &str) -> Result<Self> {
        let bad = || Error::Dyadic(lit.to_string());
        let s = lit.trim();
        if s.is_empty() {
            return Err(bad());
        }
        if let Some((p, q)) = s.split_once('/') {
            let num = parse_int(p, lit)?;
            let q = q.trim();
            if let Some(e) = q.strip_prefix("2^") {
                let e = exponent_in_range(parse_int(e, lit)?, lit)?;
                if e < 0 {
                    return Err(bad());
                }
                if num.unsigned_abs() >= 1u128 << 100 {
                    return Err(bad());
                }
                return Ok(Dyadic::new(num, e as u32));
            }
            let den = parse_int(q, lit)?;
            if den <= 0 || den.count_ones() != 1 || den.trailing_zeros() > MAX_EXP {
                return Err(bad());
            }
            if num.unsigned_abs() >= 1u128 << 100 {
                return Err(bad());
            }
            return Ok(Dyadic::new(num, den.trailing_zeros()));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        if let Some(e) = body.strip_prefix("2^") {
            let e = exponent_in_range(parse_int(e, lit)?, lit)?;
            let d = Dyadic::pow2(e);
            return Ok(if neg { -d } else { d });
        }
        if let Some((int_part, frac_part)) = body.split_once('.') {
            let int_ok = int_part.bytes().all(|b| b.is_ascii_digit());
            let frac_ok = !frac_part.is_empty() && frac_part.bytes().all(|b| b.is_ascii_digit());
            if !int_ok || !frac_ok || int_part.len() + frac_part.len() > 30 {
                return Err(bad());
            }
            let frac_part = frac_part.trim_end_matches('0');
            let k = frac_part.len() as u32;
            let digits = format!("{int_part}{frac_part}");
            let mut num: i128 = if digits.is_empty() {
                0
            } else {
                parse_int(&digits, lit)?
            };
            // value = num / 10^k = num / (2^k 5^k); dyadic iff 5^k | num
            let five_k = 5i128.pow(k);
            if num % five_k != 0 {
                return Err(bad());
            }
            num /= five_k;
            let d = Dyadic::new(num, k);
            return Ok(if neg { -d } else { d });
        }
        let n = parse_int(body, lit)?;
        if n.unsigned_abs() >= 1u128 << 100 {
            return Err(bad());
        }
        let d = Dyadic::new(n, 0);
        Ok(if neg { -d } else { d })
    }
}

impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for Dyadic {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_power_forms() {
        assert_eq!("2^-9".parse::<Dyadic>().unwrap(), Dyadic::new(1, 9));
        assert_eq!("2^-9".parse::<Dyadic>().unwrap().to_f64(), 1.0 / 512.0);
        assert_eq!(
            "15/16".parse::<Dyadic>().unwrap(),
            Dyadic::ONE - Dyadic::pow2(-4)
        );
        assert_eq!("-3/2^5".parse::<Dyadic>().unwrap().to_f64(), -3.0 / 32.0);
        assert_eq!("4/2^3".parse::<Dyadic>().unwrap(), Dyadic::HALF);
        assert_eq!("0.375".parse::<Dyadic>().unwrap(), Dyadic::new(3, 3));
        assert_eq!("-2^3".parse::<Dyadic>().unwrap(), Dyadic::from_int(-8));
        assert_eq!("7".parse::<Dyadic>().unwrap(), Dyadic::from_int(7));
        assert_eq!("2.500".parse::<Dyadic>().unwrap(), Dyadic::new(5, 1));
    }

    #[test]
    fn rejects_non_dyadic() {
        for lit in [
            "0.1", "1/3", "1/0", "2^", "", "abc", "1/2^-3", "2^1000", "1.", ".5e3",
        ] {
            assert!(lit.parse::<Dyadic>().is_err(), "{lit} should be rejected");
        }
    }

    #[test]
    fn ordering_and_arithmetic() {
        let a = Dyadic::new(3, 2);
        let b = Dyadic::new(5, 3);
        assert!(b < a);
        assert_eq!(a + b, Dyadic::new(11, 3));
        assert_eq!(a - a, Dyadic::ZERO);
        assert_eq!(a * b, Dyadic::new(15, 5));
        assert_eq!(Dyadic::new(-3, 1).floor(), -2);
        assert_eq!(Dyadic::new(12, 0).shl(-2), Dyadic::from_int(3));
    }

    #[test]
    fn from_f64_is_exact() {
        assert_eq!(Dyadic::from_f64(0.6875), Some(Dyadic::new(11, 4)));
        assert_eq!(Dyadic::from_f64(-0.0), Some(Dyadic::ZERO));
        assert_eq!(Dyadic::from_f64(f64::NAN), None);
        assert!(Dyadic::from_f64(1e-300).is_none());
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(num in -1_000_000i64..1_000_000, exp in 0u32..40) {
            let d = Dyadic::new(num as i128, exp);
            prop_assert_eq!(d.to_string().parse::<Dyadic>().unwrap(), d);
            prop_assert_eq!(Dyadic::from_f64(d.to_f64()).unwrap(), d);
        }
    }
}
