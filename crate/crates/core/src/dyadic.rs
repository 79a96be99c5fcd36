//! Exact dyadic rationals `mantissa * 2^exponent`.
//!
//! Every value is kept canonical: the mantissa is odd, or the value is zero
//! with mantissa 0 and exponent 0. Equality is therefore structural.
//! Addition, subtraction and multiplication are exact. Division is not
//! offered; [`Dyadic::round_ratio`] produces a rounded quotient with a
//! stated error.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    pub fn new(mantissa: BigInt, exponent: i64) -> Self {
        if mantissa.is_zero() {
            return Self::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        if tz == 0 {
            Dyadic { mantissa, exponent }
        } else {
            Dyadic { mantissa: mantissa >> tz, exponent: exponent + tz as i64 }
        }
    }

    pub fn zero() -> Self {
        Dyadic { mantissa: BigInt::zero(), exponent: 0 }
    }

    pub fn one() -> Self {
        Dyadic { mantissa: BigInt::one(), exponent: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        Self::new(BigInt::from(v), 0)
    }

    /// `2^k`.
    pub fn pow2(k: i64) -> Self {
        Dyadic { mantissa: BigInt::one(), exponent: k }
    }

    /// Exact conversion of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if raw_exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), raw_exp - 1075) };
        Some(Self::new(BigInt::from(m) * sign, e))
    }

    /// -1, 0 or +1.
    pub fn sign(&self) -> i8 {
        match self.mantissa.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    /// Magnitude of the mantissa (odd unless zero).
    pub fn mantissa(&self) -> &BigUint {
        self.mantissa.magnitude()
    }

    pub fn signed_mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    /// Number of bits right of the binary point.
    pub fn prec(&self) -> u64 {
        if self.exponent < 0 {
            (-self.exponent) as u64
        } else {
            0
        }
    }

    pub fn abs(&self) -> Self {
        Dyadic { mantissa: self.mantissa.abs(), exponent: self.exponent }
    }

    /// Multiply by `2^k`, exact.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Dyadic { mantissa: self.mantissa.clone(), exponent: self.exponent + k }
    }

    /// `floor(log2 |x|)`, or `None` for zero.
    pub fn log2_floor(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exponent + self.mantissa.bits() as i64 - 1)
        }
    }

    /// Smallest `k` with `|x| <= 2^k`, or `None` for zero.
    pub fn log2_ceil(&self) -> Option<i64> {
        let fl = self.log2_floor()?;
        if self.mantissa.magnitude().is_one() {
            Some(fl)
        } else {
            Some(fl + 1)
        }
    }

    /// Integer `v` such that `self = v * 2^-m`, if that is exact.
    fn scaled_integer(&self, m: i64) -> Option<BigInt> {
        let shift = self.exponent + m;
        if shift >= 0 {
            Some(&self.mantissa << shift as usize)
        } else {
            None
        }
    }

    /// Round to the nearest multiple of `2^-m`, ties away from zero.
    /// The error is at most `2^-(m+1)`.
    pub fn round(&self, m: u32) -> Self {
        self.round_to(m as i64)
    }

    /// [`Dyadic::round`] with a signed precision.
    pub fn round_to(&self, m: i64) -> Self {
        if self.exponent >= -m {
            return self.clone();
        }
        let s = (-m - self.exponent) as usize;
        let mag = self.mantissa.magnitude();
        let q: BigUint = mag >> s;
        let bit = mag.bit((s - 1) as u64);
        let q = if bit { q + 1u32 } else { q };
        let q = BigInt::from_biguint(self.mantissa.sign(), q);
        Self::new(q, -m)
    }

    /// Largest multiple of `2^-m` that is `<= self`.
    pub fn floor_to(&self, m: i64) -> Self {
        if self.exponent >= -m {
            return self.clone();
        }
        let s = (-m - self.exponent) as usize;
        Self::new(&self.mantissa >> s, -m)
    }

    /// Smallest multiple of `2^-m` that is `>= self`.
    pub fn ceil_to(&self, m: i64) -> Self {
        self.neg().floor_to(m).neg()
    }

    /// Upper bound of `|self|` keeping at most `bits` significant bits.
    pub fn mag_upper(&self, bits: u32) -> Self {
        let a = self.abs();
        match a.log2_floor() {
            None => a,
            Some(fl) => a.ceil_to(bits as i64 - 1 - fl),
        }
    }

    /// Lower bound of `|self|` keeping at most `bits` significant bits.
    pub fn mag_lower(&self, bits: u32) -> Self {
        let a = self.abs();
        match a.log2_floor() {
            None => a,
            Some(fl) => a.floor_to(bits as i64 - 1 - fl),
        }
    }

    /// Nearest multiple of `2^-m` to `num/den`, ties away from zero.
    pub fn round_ratio(num: &BigInt, den: &BigInt, m: i64) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let (mut n, mut d) = if m >= 0 {
            (num << m as usize, den.clone())
        } else {
            (num.clone(), den << (-m) as usize)
        };
        if d.is_negative() {
            n = -n;
            d = -d;
        }
        let (q, r) = n.magnitude().div_rem(d.magnitude());
        let q = if (r << 1usize) >= *d.magnitude() { q + 1u32 } else { q };
        Ok(Self::new(BigInt::from_biguint(n.sign(), q), -m))
    }

    /// Directed variant: largest multiple of `2^-m` not above `num/den`.
    pub fn floor_ratio(num: &BigInt, den: &BigInt, m: i64) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let (mut n, mut d) = if m >= 0 {
            (num << m as usize, den.clone())
        } else {
            (num.clone(), den << (-m) as usize)
        };
        if d.is_negative() {
            n = -n;
            d = -d;
        }
        Ok(Self::new(n.div_floor(&d), -m))
    }

    pub fn ceil_ratio(num: &BigInt, den: &BigInt, m: i64) -> Result<Self> {
        Ok(Self::floor_ratio(&-num, den, m)?.neg())
    }

    /// `p/q` rounded to `m` bits; error at most `2^-(m+1)`.
    pub fn from_rational(p: &BigInt, q: &BigInt, m: u32) -> Result<Self> {
        Self::round_ratio(p, q, m as i64)
    }

    pub fn from_big_rational(q: &BigRational, m: i64) -> Self {
        // denominators of BigRational are never zero
        Self::round_ratio(q.numer(), q.denom(), m).expect("nonzero denominator")
    }

    /// Exact conversion when the rational has a power-of-two denominator.
    pub fn try_from_rational(q: &BigRational) -> Option<Self> {
        let d = q.denom();
        let tz = d.trailing_zeros()?;
        if (d >> tz as usize).is_one() {
            Some(Self::new(q.numer().clone(), -(tz as i64)))
        } else {
            None
        }
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exponent >= 0 {
            BigRational::from_integer(&self.mantissa << self.exponent as usize)
        } else {
            BigRational::new(self.mantissa.clone(), BigInt::one() << (-self.exponent) as usize)
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mantissa.bits() as i64;
        let (m, e) = if bits > 64 {
            (&self.mantissa >> (bits - 64) as usize, self.exponent + bits - 64)
        } else {
            (self.mantissa.clone(), self.exponent)
        };
        let mf = m.to_f64().unwrap_or(f64::NAN);
        if e > i32::MAX as i64 {
            return mf.signum() * f64::INFINITY;
        }
        if e < i32::MIN as i64 {
            return 0.0;
        }
        // split the scaling so subnormal results do not flush to zero
        let e = e.clamp(-2200, 2200) as i32;
        mf * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }

    /// Binary rendering `s_n...s_0.t_1...t_m` with a leading `-` for negatives.
    pub fn to_binary_string(&self) -> String {
        let mut out = String::new();
        if self.is_negative() {
            out.push('-');
        }
        let prec = self.prec() as usize;
        let mag = self.mantissa.magnitude();
        let digits = if self.exponent >= 0 {
            (mag << self.exponent as usize).to_str_radix(2)
        } else {
            mag.to_str_radix(2)
        };
        if prec == 0 {
            out.push_str(&digits);
            return out;
        }
        let padded = if digits.len() <= prec { format!("{}{}", "0".repeat(prec + 1 - digits.len()), digits) } else { digits };
        let (int, frac) = padded.split_at(padded.len() - prec);
        out.push_str(int);
        out.push('.');
        out.push_str(frac);
        out
    }

    /// Exact decimal expansion (every dyadic has a finite one).
    pub fn to_decimal_exact(&self) -> String {
        let prec = self.prec() as usize;
        if prec == 0 {
            return self.scaled_integer(0).map(|v| v.to_string()).unwrap_or_default();
        }
        // m / 2^p = m * 5^p / 10^p
        let scaled = self.mantissa.magnitude() * num_traits::pow(BigUint::from(5u32), prec);
        render_decimal(self.is_negative(), &scaled, prec)
    }

    /// Decimal rendering rounded to `digits` fractional digits (ties away from zero).
    /// The rounding error is at most `0.5 * 10^-digits`.
    pub fn to_decimal(&self, digits: usize) -> String {
        let prec = self.prec() as usize;
        if prec <= digits && prec == 0 {
            let s = self.to_decimal_exact();
            return if digits == 0 { s } else { format!("{s}.{}", "0".repeat(digits)) };
        }
        let ten_d = num_traits::pow(BigInt::from(10u32), digits);
        let num = &self.mantissa * &ten_d;
        let (num, den) = if self.exponent >= 0 {
            (num << self.exponent as usize, BigInt::one())
        } else {
            (num, BigInt::one() << prec)
        };
        let (q, r) = num.magnitude().div_rem(den.magnitude());
        let q = if (r << 1usize) >= *den.magnitude() { q + 1u32 } else { q };
        render_decimal(self.is_negative() && !q.is_zero(), &q, digits)
    }

    /// Parse an exact decimal such as `-0.375`; fails if it is not dyadic.
    pub fn from_decimal_str(s: &str) -> Result<Self> {
        let q = crate::rational::parse_rational(s)?;
        Self::try_from_rational(&q).ok_or_else(|| Error::InvalidArgument(format!("{s} is not a dyadic rational")))
    }
}

fn render_decimal(negative: bool, scaled: &BigUint, frac_digits: usize) -> String {
    let digits = scaled.to_str_radix(10);
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if frac_digits == 0 {
        out.push_str(&digits);
        return out;
    }
    let padded = if digits.len() <= frac_digits { format!("{}{}", "0".repeat(frac_digits + 1 - digits.len()), digits) } else { digits };
    let (int, frac) = padded.split_at(padded.len() - frac_digits);
    out.push_str(int);
    out.push('.');
    out.push_str(frac);
    out
}

fn align(a: &Dyadic, b: &Dyadic) -> (BigInt, BigInt, i64) {
    let e = a.exponent.min(b.exponent);
    (&a.mantissa << (a.exponent - e) as usize, &b.mantissa << (b.exponent - e) as usize, e)
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let (x, y, e) = align(self, rhs);
        Dyadic::new(x + y, e)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return -rhs;
        }
        let (x, y, e) = align(self, rhs);
        Dyadic::new(x - y, e)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() || rhs.is_zero() {
            return Dyadic::zero();
        }
        // product of odd mantissas is odd
        Dyadic { mantissa: &self.mantissa * &rhs.mantissa, exponent: self.exponent + rhs.exponent }
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -&self.mantissa, exponent: self.exponent }
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -self.mantissa, exponent: self.exponent }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Dyadic> for Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: &Dyadic) -> Dyadic {
                (&self).$m(rhs)
            }
        }
        impl $tr<Dyadic> for &Dyadic {
            type Output = Dyadic;
            fn $m(self, rhs: Dyadic) -> Dyadic {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.sign(), other.sign());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let (x, y, _) = align(self, other);
        x.cmp(&y)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for Dyadic {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mantissa, self.exponent)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => f.write_str(&self.to_decimal(p)),
            None => f.write_str(&self.to_decimal_exact()),
        }
    }
}

impl FromStr for Dyadic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::from_decimal_str(s)
    }
}
