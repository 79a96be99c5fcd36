//! Test oracles that do not route through the crate's own numerics.

#![allow(dead_code)]

pub mod constants;

use capcert_core::{CReal, Dyadic};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(p: i64, d: i64) -> BigRational {
    BigRational::new(p.into(), d.into())
}

pub fn pow2(k: i64) -> BigRational {
    if k >= 0 {
        BigRational::from_integer(BigInt::one() << k as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-k) as usize)
    }
}

/// Exact value of a plain decimal literal such as `-0.125`.
pub fn dec(s: &str) -> BigRational {
    let (neg, s) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let (ip, fp) = s.split_once('.').unwrap_or((s, ""));
    let digits: BigInt = format!("{ip}{fp}").parse().unwrap();
    let v = BigRational::new(digits, num_traits::pow(BigInt::from(10), fp.len()));
    if neg {
        -v
    } else {
        v
    }
}

/// Truncate `x` to a multiple of `2^-bits`, keeping rational sizes bounded.
fn trunc(x: &BigRational, bits: u32) -> BigRational {
    let scaled = x * pow2(bits as i64);
    BigRational::new(scaled.to_integer(), BigInt::one() << bits as usize)
}

/// `ln x` within `2^-bits` for `bits <= 580`, by `x = 2^e y` with `y` in
/// `[1, 2)` and `ln y = 2 atanh((y - 1) / (y + 1))`, using the frozen `ln 2`.
pub fn ref_ln(x: &BigRational, bits: u32) -> BigRational {
    assert!(x.is_positive());
    assert!(bits <= 580);
    let two = q(2, 1);
    let mut y = x.clone();
    let mut e: i64 = 0;
    while y >= two {
        y /= &two;
        e += 1;
    }
    while y < BigRational::one() {
        y *= &two;
        e -= 1;
    }
    let w = bits + 24;
    let z = trunc(&((&y - BigRational::one()) / (&y + BigRational::one())), w + 4);
    let z2 = trunc(&(&z * &z), w + 4);
    let mut term = z.clone();
    let mut sum = BigRational::zero();
    let mut k = 0i64;
    // z <= 1/3, so terms fall by at least 9 each step
    while term.abs() > pow2(-(w as i64) - 4) {
        sum += &term / BigRational::from_integer((2 * k + 1).into());
        term = trunc(&(&term * &z2), w + 4);
        k += 1;
    }
    sum * two + dec(constants::LN2) * BigRational::from_integer(e.into())
}

/// Computable real whose approximations come from a frozen decimal, valid
/// for precisions up to about 590 bits.
pub fn creal_from_decimal(s: &'static str) -> CReal {
    let v = dec(s);
    CReal::from_process(move |n| {
        let scaled = &v * pow2(n as i64 + 1);
        let r = (scaled + q(1, 2)).floor().to_integer();
        Ok(Dyadic::new(r, -(n as i64) - 1))
    })
}

pub fn err_at_most(v: &Dyadic, truth: &BigRational, k: i64) -> bool {
    (v.to_rational() - truth).abs() <= pow2(-k)
}

/// `f64` versions of the catalog spectra on `[0, 1]`.
pub fn noise_f64(name: &str) -> fn(f64) -> f64 {
    use std::f64::consts::PI;
    match name {
        "flat" => |_| 1.0,
        "affine" => |f| 1.0 + f,
        "quadratic" => |f| 1.0 + f * f,
        "sine" => |f| 2.0 + (2.0 * PI * f).sin(),
        "halfsine" => |f| 2.0 + (PI * f).sin(),
        "decay" => |f| 0.25 + (-f).exp(),
        "cosine" => |f| 1.5 + (2.0 * PI * f).cos(),
        "sqrt" => |f| 1.0 + (1.0 + f).sqrt(),
        "stress-0" => |f| f.sin() / 2.0 + 1.0,
        "stress-2" => |f| (4.0 * f).sin() / 2.0 + 1.0,
        "stress-4" => |f| (16.0 * f).sin() / 2.0 + 1.0,
        _ => panic!("no f64 reference for {name}"),
    }
}

/// Midpoint Riemann sum of `g` over `[0, b]` with `k` cells.
pub fn riemann(g: impl Fn(f64) -> f64, b: f64, k: usize) -> f64 {
    let h = b / k as f64;
    (0..k).map(|i| g((i as f64 + 0.5) * h)).sum::<f64>() * h
}
