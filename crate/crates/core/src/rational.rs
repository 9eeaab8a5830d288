//! Exact rational scalars.
//!
//! All coefficients in this crate are arbitrary-precision rationals.
//! `BigRational` already maintains the invariants we need (always reduced,
//! positive denominator), so this module only adds the small constructors
//! and conversions used throughout.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    assert!(den != 0, "zero denominator");
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// (-1)^k as a rational.
pub fn sign_pow(k: u64) -> Rational {
    if k % 2 == 0 {
        Rational::one()
    } else {
        -Rational::one()
    }
}

/// 2^k for possibly negative k.
pub fn two_pow(k: i64) -> Rational {
    let mag = BigInt::from(2u32).pow(k.unsigned_abs() as u32);
    if k >= 0 {
        Rational::from_integer(mag)
    } else {
        Rational::new(BigInt::one(), mag)
    }
}

pub fn factorial(k: u64) -> Rational {
    let mut acc = BigInt::one();
    for i in 2..=k {
        acc *= BigInt::from(i);
    }
    Rational::from_integer(acc)
}

/// Generalized binomial coefficient alpha(alpha-1)...(alpha-k+1)/k!.
pub fn binomial(alpha: &Rational, k: u64) -> Rational {
    let mut num = Rational::one();
    for i in 0..k {
        num *= alpha - rat(i as i64);
    }
    num / factorial(k)
}

/// Decimal-string form used by the wire formats: exact, no precision loss.
pub fn to_decimal_strings(r: &Rational) -> (String, String) {
    (r.numer().to_string(), r.denom().to_string())
}

pub fn from_decimal_strings(num: &str, den: &str) -> Option<Rational> {
    let n: BigInt = num.parse().ok()?;
    let d: BigInt = den.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(Rational::new(n, d))
}

pub fn is_negative(r: &Rational) -> bool {
    r.is_negative()
}
