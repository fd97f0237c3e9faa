//! Exact rational scalars used throughout the solver.
//!
//! All arithmetic is over arbitrary-precision rationals kept in lowest
//! terms (the `Ratio` constructor reduces on every operation), so every
//! comparison in the algorithm is exact.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

pub type Int = BigInt;
pub type Rational = BigRational;

/// Build a rational from machine integers.
pub fn rat(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn big(v: i64) -> Int {
    BigInt::from(v)
}

pub fn is_integral(r: &Rational) -> bool {
    r.denom().is_one()
}

pub fn floor_int(r: &Rational) -> Int {
    r.floor().to_integer()
}

pub fn ceil_int(r: &Rational) -> Int {
    r.ceil().to_integer()
}

/// `base^exp` for nonnegative integer exponents.
pub fn pow_int(base: &Int, exp: u32) -> Int {
    base.pow(exp)
}

pub fn pow_rat(base: &Rational, exp: u32) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Parse `"p/q"` or `"p"` into a rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rational::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(Rational::from_integer(n))
    }
}

/// Render as `p/q` (always with an explicit denominator, e.g. `100/1`).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Max of |numerator| and denominator, the quantity bounded by the
/// bit-size arguments.
pub fn bit_magnitude(r: &Rational) -> Int {
    let n = r.numer().abs();
    let d = r.denom().clone();
    if n > d {
        n
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rational("-4"), Some(rat_int(-4)));
        assert_eq!(parse_rational("5/0"), None);
        assert_eq!(format_rational(&rat(100, 1)), "100/1");
        assert_eq!(format_rational(&rat(-6, 4)), "-3/2");
    }

    #[test]
    fn floor_ceil() {
        assert_eq!(floor_int(&rat(7, 3)), big(2));
        assert_eq!(ceil_int(&rat(7, 3)), big(3));
        assert_eq!(floor_int(&rat(-7, 3)), big(-3));
        assert_eq!(ceil_int(&rat(-7, 3)), big(-2));
        assert_eq!(floor_int(&rat_int(4)), big(4));
        assert_eq!(ceil_int(&rat_int(4)), big(4));
    }

    #[test]
    fn lowest_terms_is_automatic() {
        let r = rat(2, 4) + rat(1, 4);
        assert_eq!(r.numer(), &big(3));
        assert_eq!(r.denom(), &big(4));
        let s = rat(1, 3) * rat(3, 5);
        assert_eq!(s, rat(1, 5));
    }
}
