//! Certified elementary functions on dyadic arguments.
//!
//! Every function takes a target precision `p` and returns a dyadic within
//! `2^-p` of the exact value. Series are summed in fixed point with a
//! per-term error count that sets the guard bits.

use std::sync::Mutex;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::creal::ln2;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::rigorlog;

fn guard_bits(p: u32) -> u32 {
    12 + (64 - (p as u64 + 64).leading_zeros())
}

/// `err <= 2^slack`.
fn fits(err: u64, slack: u32) -> bool {
    slack >= 64 || err <= 1u64 << slack
}

/// `atan(1/k) * 2^w` with absolute error at most `err` units.
fn atan_inv_fixed(k: u64, w: u32) -> (BigInt, u64) {
    let k2 = k * k;
    let mut term = (BigInt::one() << w as usize) / k;
    let mut sum = term.clone();
    let mut j: u64 = 0;
    loop {
        term = term / k2;
        j += 1;
        if term.is_zero() {
            break;
        }
        let t = &term / (2 * j + 1);
        if j % 2 == 1 {
            sum -= t;
        } else {
            sum += t;
        }
    }
    (sum, 2 * j + 4)
}

static PI_CACHE: Mutex<Option<(u32, Dyadic)>> = Mutex::new(None);

/// `pi` within `2^-p`, from `pi = 16 atan(1/5) - 4 atan(1/239)`.
pub fn pi(p: u32) -> Dyadic {
    if let Some((b, v)) = PI_CACHE.lock().expect("poisoned").as_ref() {
        if *b >= p {
            return v.clone();
        }
    }
    let mut w = p + guard_bits(p);
    let v = loop {
        let (a5, e5) = atan_inv_fixed(5, w);
        let (a239, e239) = atan_inv_fixed(239, w);
        let err = 16 * e5 + 4 * e239;
        if fits(err, w - p - 1) {
            break Dyadic::new(a5 * 16u32 - a239 * 4u32, -(w as i64));
        }
        w += 8;
    };
    *PI_CACHE.lock().expect("poisoned") = Some((p, v.clone()));
    v
}

fn fixed(x: &Dyadic, w: u32) -> BigInt {
    // nearest integer to x * 2^w
    let r = x.round(w);
    let shift = r.exponent() + w as i64;
    r.signed_mantissa() << shift as usize
}

/// `x - k pi/2` for the nearest `k`, with the reduction error below `2^-(p+4)`.
fn reduce_half_pi(x: &Dyadic, p: u32) -> Result<(Dyadic, i64)> {
    let mag = x.log2_floor().unwrap_or(0).max(0);
    if mag > 60 {
        return Err(Error::Unsupported(format!("trigonometric argument too large: 2^{mag}")));
    }
    let coarse = pi(64 + mag as u32);
    let k = (x.to_f64() / (coarse.to_f64() / 2.0)).round() as i64;
    if k == 0 {
        return Ok((x.clone(), 0));
    }
    let kbits = 64 - k.unsigned_abs().leading_zeros();
    let pk = pi(p + 4 + kbits);
    let r = x - &(&pk * &Dyadic::from_int(k)).mul_pow2(-1);
    Ok((r, k))
}

/// `(sin r, cos r) * 2^w` for `|r| <= 1`, each with error at most `err` units.
fn sin_cos_fixed(r: &Dyadic, w: u32) -> (BigInt, BigInt, u64) {
    let big_r = fixed(r, w);
    let half = BigInt::one() << (w - 1) as usize;
    let r2 = (&big_r * &big_r + &half) >> w as usize;

    let mut term = big_r.clone();
    let mut s = big_r.clone();
    let mut j: u64 = 1;
    loop {
        term = ((&term * &r2) >> w as usize) / ((2 * j) * (2 * j + 1));
        if term.is_zero() {
            break;
        }
        if j % 2 == 1 {
            s -= &term;
        } else {
            s += &term;
        }
        j += 1;
    }
    let js = j;

    let mut term = BigInt::one() << w as usize;
    let mut c = term.clone();
    let mut j: u64 = 1;
    loop {
        term = ((&term * &r2) >> w as usize) / ((2 * j - 1) * (2 * j));
        if term.is_zero() {
            break;
        }
        if j % 2 == 1 {
            c -= &term;
        } else {
            c += &term;
        }
        j += 1;
    }
    (s, c, 4 * js.max(j) + 8)
}

fn sin_cos(x: &Dyadic, p: u32) -> Result<(Dyadic, Dyadic)> {
    if x.is_zero() {
        return Ok((Dyadic::zero(), Dyadic::one()));
    }
    let (r, k) = reduce_half_pi(x, p)?;
    let mut w = p + guard_bits(p);
    let (s, c) = loop {
        let (s, c, err) = sin_cos_fixed(&r, w);
        if fits(err, w - p - 2) {
            break (Dyadic::new(s, -(w as i64)), Dyadic::new(c, -(w as i64)));
        }
        w += 8;
    };
    Ok(match k.rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    })
}

pub fn sin(x: &Dyadic, p: u32) -> Result<Dyadic> {
    Ok(sin_cos(x, p)?.0)
}

pub fn cos(x: &Dyadic, p: u32) -> Result<Dyadic> {
    Ok(sin_cos(x, p)?.1)
}

/// `exp(x)` within `2^-p`, reducing by `x = k ln 2 + r`.
pub fn exp(x: &Dyadic, p: u32) -> Result<Dyadic> {
    if x.is_zero() {
        return Ok(Dyadic::one());
    }
    let xf = x.to_f64();
    if !xf.is_finite() || xf.abs() > 1e6 {
        return Err(Error::Unsupported(format!("exponential argument out of range: {}", x.to_decimal(6))));
    }
    let k = (xf / std::f64::consts::LN_2).round() as i64;
    let up = k.max(0) as u32;
    let r = if k == 0 {
        x.clone()
    } else {
        let kbits = 64 - k.unsigned_abs().leading_zeros();
        let l2 = ln2().query(p + up + 4 + kbits)?;
        x - &(&l2 * &Dyadic::from_int(k))
    };
    let mut w = p + up + guard_bits(p + up);
    loop {
        let big_r = fixed(&r, w);
        let mut term = BigInt::one() << w as usize;
        let mut sum = term.clone();
        let mut j: u64 = 1;
        loop {
            term = ((&term * &big_r) >> w as usize) / j;
            if term.is_zero() {
                break;
            }
            sum += &term;
            j += 1;
        }
        let err = 2 * j + 4;
        if fits(err, w - p - up - 2) {
            return Ok(Dyadic::new(sum, k - w as i64));
        }
        w += 8;
    }
}

/// Largest multiple of `2^-(p+2)` not above `sqrt(x)`. Error below `2^-(p+1)`.
pub fn sqrt_floor(x: &Dyadic, p: u32) -> Result<Dyadic> {
    if x.is_negative() {
        return Err(Error::OutOfDomain { point: x.to_string(), lo: "0".into(), hi: "inf".into() });
    }
    let q = p as i64 + 2;
    let scaled = x.mul_pow2(2 * q).floor_to(0);
    let n = scaled.signed_mantissa() << scaled.exponent().max(0) as usize;
    Ok(Dyadic::new(n.sqrt(), -q))
}

/// `sqrt(x)` within `2^-p`.
pub fn sqrt(x: &Dyadic, p: u32) -> Result<Dyadic> {
    sqrt_floor(x, p)
}

/// `ln(x)` within `2^-p` for `x > 0`.
pub fn ln(x: &Dyadic, p: u32) -> Result<Dyadic> {
    if !x.is_positive() {
        return Err(Error::OutOfDomain { point: x.to_string(), lo: "0".into(), hi: "inf".into() });
    }
    Ok(rigorlog::ln_rational(&x.to_rational(), p))
}
