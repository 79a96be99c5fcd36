//! Helpers for exact rationals used as parameters and certified bounds.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(p))
}

/// Compare `q` with `2^k`.
pub fn cmp_pow2(q: &BigRational, k: i64) -> Ordering {
    let (n, d) = (q.numer(), q.denom());
    if k >= 0 {
        n.cmp(&(d << k as usize))
    } else {
        (n << (-k) as usize).cmp(d)
    }
}

/// Smallest `k` with `q <= 2^k`. Requires `q > 0`.
pub fn ceil_log2(q: &BigRational) -> i64 {
    assert!(q.is_positive(), "ceil_log2 of non-positive value");
    let guess = q.numer().bits() as i64 - q.denom().bits() as i64;
    let mut k = guess - 1;
    while cmp_pow2(q, k) == Ordering::Greater {
        k += 1;
    }
    while cmp_pow2(q, k - 1) != Ordering::Greater {
        k -= 1;
    }
    k
}

/// Smallest `k` with `q <= 2^k`, clamped below at zero. Zero and negative
/// inputs give zero.
pub fn ceil_log2_nonneg(q: &BigRational) -> u32 {
    if !q.is_positive() {
        0
    } else {
        ceil_log2(q).max(0) as u32
    }
}

/// Smallest `k >= 0` with `q < 2^k` (strict).
pub fn min_pow2_exceeding(q: &BigRational) -> u32 {
    let mut k: u32 = 0;
    if q.is_positive() {
        k = ceil_log2(q).max(0) as u32;
        while cmp_pow2(q, k as i64) != Ordering::Less {
            k += 1;
        }
        while k > 0 && cmp_pow2(q, k as i64 - 1) == Ordering::Less {
            k -= 1;
        }
    }
    k
}

pub fn pow2(k: i64) -> BigRational {
    if k >= 0 {
        BigRational::from_integer(BigInt::one() << k as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as usize)
    }
}

pub fn ceil_int(q: &BigRational) -> BigInt {
    q.ceil().to_integer()
}

/// Lower bound of `q` with at most `bits` significant bits.
pub fn floor_sig(q: &BigRational, bits: u32) -> BigRational {
    if q.is_zero() {
        return q.clone();
    }
    let k = ceil_log2(&q.abs());
    Dyadic::floor_ratio(q.numer(), q.denom(), bits as i64 - k).expect("nonzero denominator").to_rational()
}

/// Upper bound of `q` with at most `bits` significant bits.
pub fn ceil_sig(q: &BigRational, bits: u32) -> BigRational {
    -floor_sig(&-q, bits)
}

pub fn max(a: &BigRational, b: &BigRational) -> BigRational {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn min(a: &BigRational, b: &BigRational) -> BigRational {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// Parse `"p/q"`, `"-3"`, or a decimal like `"0.125"`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: {s:?}"));
    if let Some((p, q)) = t.split_once('/') {
        let p: BigRational = parse_rational(p)?;
        let q: BigRational = parse_rational(q)?;
        if q.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        return Ok(p / q);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    if body.is_empty() {
        return Err(bad());
    }
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) || (int_part.is_empty() && frac_part.is_empty()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    let d = num_traits::pow(BigInt::from(10), frac_part.len());
    let v = BigRational::new(n, d);
    Ok(if neg { -v } else { v })
}
