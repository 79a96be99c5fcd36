//! Error-bounded Taylor-polynomial logarithm.
//!
//! A [`LogWindow`] fixes a rational bracket `[lo, hi]` and the constants
//! that control the truncated expansion of `ln` around the bracket centre
//! `c = (lo + hi) / 2`:
//!
//! ```text
//! Q_m(x) = ln c + sum_{l=1}^{m^2} (-1)^(l-1) / (l c^l) * (x - c)^l
//! ```
//!
//! With `beta = (hi - lo) / (hi + lo)` the tail after `m^2` terms is at most
//! `gamma * beta^(m^2)` where `gamma = beta / (1 - beta)`, which is below
//! `gamma * 2^-m` once `beta^m < 1/2`. `Q_m` is Lipschitz on the bracket
//! with constant `1 / lo`. [`log_compose`] combines both bounds to turn a
//! certified evaluator for `g` into one for `ln g`.

use std::sync::{Arc, LazyLock, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::creal::ln2;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::rational::{ceil_log2, ceil_log2_nonneg, cmp_pow2, min_pow2_exceeding, rat};

#[derive(Clone)]
pub struct LogWindow {
    alpha_lo: BigRational,
    alpha_hi: BigRational,
    center: BigRational,
    beta: BigRational,
    gamma: BigRational,
    lipschitz: BigRational,
    m1: u32,
    m2: u32,
    m3: u32,
    /// Extra working bits for fixed-point Horner, `ceil(log2(5 / (1 - beta)))`.
    horner_guard: u32,
    ln_center: Arc<Mutex<Option<(u32, Dyadic)>>>,
}

impl std::fmt::Debug for LogWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogWindow")
            .field("alpha_lo", &self.alpha_lo)
            .field("alpha_hi", &self.alpha_hi)
            .field("center", &self.center)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("lipschitz", &self.lipschitz)
            .field("m1", &self.m1)
            .field("m2", &self.m2)
            .field("m3", &self.m3)
            .finish()
    }
}

/// Build the window for the bracket `[alpha_lo, alpha_hi]`.
pub fn make_log_window(alpha_lo: &BigRational, alpha_hi: &BigRational) -> Result<LogWindow> {
    if !alpha_lo.is_positive() || alpha_lo >= alpha_hi {
        return Err(Error::InvalidBracket(format!("need 0 < lo < hi, got [{alpha_lo}, {alpha_hi}]")));
    }
    let two = BigRational::from_integer(2.into());
    let center = (alpha_lo + alpha_hi) / &two;
    let beta = (alpha_hi - alpha_lo) / (alpha_hi + alpha_lo);
    let one = BigRational::one();
    let gamma = &beta / (&one - &beta);
    let lipschitz = alpha_lo.recip();

    // smallest m with beta^m < 1/2, i.e. 2 p^m < q^m
    let (p, q) = (beta.numer().clone(), beta.denom().clone());
    let (mut pm, mut qm, mut m1) = (p.clone(), q.clone(), 1u32);
    while (&pm << 1usize) >= qm {
        pm *= &p;
        qm *= &q;
        m1 += 1;
    }

    let m2 = min_pow2_exceeding(&gamma);
    let m3 = min_pow2_exceeding(&lipschitz);
    let horner_guard = ceil_log2(&(BigRational::from_integer(5.into()) / (&one - &beta))).max(0) as u32;
    Ok(LogWindow {
        alpha_lo: alpha_lo.clone(),
        alpha_hi: alpha_hi.clone(),
        center,
        beta,
        gamma,
        lipschitz,
        m1,
        m2,
        m3,
        horner_guard,
        ln_center: Arc::default(),
    })
}

impl LogWindow {
    pub fn alpha_lo(&self) -> &BigRational {
        &self.alpha_lo
    }
    pub fn alpha_hi(&self) -> &BigRational {
        &self.alpha_hi
    }
    pub fn center(&self) -> &BigRational {
        &self.center
    }
    pub fn beta(&self) -> &BigRational {
        &self.beta
    }
    pub fn gamma(&self) -> &BigRational {
        &self.gamma
    }
    pub fn lipschitz(&self) -> &BigRational {
        &self.lipschitz
    }
    pub fn m1(&self) -> u32 {
        self.m1
    }
    pub fn m2(&self) -> u32 {
        self.m2
    }
    pub fn m3(&self) -> u32 {
        self.m3
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.alpha_lo <= x && x <= &self.alpha_hi
    }

    /// Padded precision `M + m2 + m3 + 1` used by [`log_compose`].
    pub fn padded_precision(&self, m: u32) -> u32 {
        m + self.m2 + self.m3 + 1
    }

    /// `ln(center)` within `2^-bits`, memoized at the best precision seen.
    pub fn ln_center(&self, bits: u32) -> Dyadic {
        if let Some((b, v)) = self.ln_center.lock().expect("poisoned").as_ref() {
            if *b >= bits {
                return v.clone();
            }
        }
        let v = ln_rational(&self.center, bits);
        let mut slot = self.ln_center.lock().expect("poisoned");
        if slot.as_ref().is_none_or(|(b, _)| *b < bits) {
            *slot = Some((bits, v.clone()));
        }
        v
    }
}

/// Number of series terms in `Q_m`.
pub fn term_count(m: u32) -> u64 {
    (m as u64) * (m as u64)
}

/// `Q_m(x)` within `2^-budget`.
///
/// The `m^2` series terms are summed by Horner's rule in fixed point with
/// `budget + 2 + horner_guard` bits. Each step rounds once, and since
/// `|x/c - 1| <= beta < 1` the accumulated rounding error stays below
/// `5 / (1 - beta)` units of the last place.
pub fn taylor_log_poly(w: &LogWindow, m: u32, x: &Dyadic, budget: u32) -> Result<Dyadic> {
    let xq = x.to_rational();
    if !w.contains(&xq) {
        return Err(Error::OutOfDomain {
            point: x.to_string(),
            lo: w.alpha_lo.to_string(),
            hi: w.alpha_hi.to_string(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidArgument("Taylor degree parameter must be at least 1".into()));
    }
    let wp = budget as i64 + 2 + w.horner_guard as i64;
    let u = (&xq - &w.center) / &w.center;
    let big_u = Dyadic::round_ratio(u.numer(), u.denom(), wp)?;
    let big_u = scaled(&big_u, wp);

    let terms = term_count(m);
    if 2 * wp + w.horner_guard as i64 + 4 < 127 {
        if let Some(u) = big_u.to_i128() {
            let s = horner_i128(u, terms, wp as u32);
            let series = Dyadic::new(BigInt::from(s), -wp);
            return Ok((&w.ln_center(budget + 2) + &series).round(budget + 2));
        }
    }
    let series = Dyadic::new(horner_big(&big_u, terms, wp as u32), -wp);
    Ok((&w.ln_center(budget + 2) + &series).round(budget + 2))
}

/// `sum_{l=1}^{terms} (-1)^(l+1) u^l / l` in fixed point with `wp` fractional
/// bits, each coefficient and product rounded to nearest.
fn horner_big(u: &BigInt, terms: u64, wp: u32) -> BigInt {
    let unit2 = BigInt::one() << (wp + 1) as usize;
    let half = BigInt::one() << (wp - 1) as usize;
    let inv = |l: u64| -> BigInt { ((&unit2 / l) + 1u32) >> 1usize };
    let mut acc = inv(terms);
    let mut l = terms;
    while l > 1 {
        l -= 1;
        let prod = (u * &acc + &half) >> wp as usize;
        acc = inv(l) - prod;
    }
    (u * &acc + &half) >> wp as usize
}

/// Same arithmetic as [`horner_big`], for working precisions where every
/// intermediate fits in 127 bits.
fn horner_i128(u: i128, terms: u64, wp: u32) -> i128 {
    let unit2 = 1i128 << (wp + 1);
    let half = 1i128 << (wp - 1);
    let inv = |l: u64| -> i128 { ((unit2 / l as i128) + 1) >> 1 };
    let mut acc = inv(terms);
    let mut l = terms;
    while l > 1 {
        l -= 1;
        acc = inv(l) - ((u * acc + half) >> wp);
    }
    (u * acc + half) >> wp
}

/// `Q_m(x) - ln(center)` as an exact rational. Slow; used to cross-check
/// [`taylor_log_poly`] at small degrees.
pub fn taylor_log_series_exact(w: &LogWindow, m: u32, x: &BigRational) -> BigRational {
    let u = (x - &w.center) / &w.center;
    let mut acc = BigRational::zero();
    let terms = term_count(m);
    let mut l = terms;
    while l >= 1 {
        let c = BigRational::new(BigInt::one(), BigInt::from(l));
        acc = c - &u * &acc;
        l -= 1;
    }
    u * acc
}

/// Certified `ln g(point)` within `2^-m` from a certified evaluator of `g`.
///
/// `g_eval(point, k)` must return a value within `2^-k` of `g(point)`, and
/// `g(point)` must lie inside the window far enough that the approximation
/// at the padded precision stays inside it too.
pub fn log_compose<G>(g_eval: G, w: &LogWindow, point: &Dyadic, m: u32) -> Result<Dyadic>
where
    G: FnOnce(&Dyadic, u32) -> Result<Dyadic>,
{
    let padded = w.padded_precision(m);
    let approx = g_eval(point, padded)?;
    if !w.contains(&approx.to_rational()) {
        return Err(Error::WitnessViolation(format!(
            "approximation {} of the log argument left the window [{}, {}]",
            approx.to_decimal(12),
            w.alpha_lo,
            w.alpha_hi
        )));
    }
    let degree = (padded + 1).max(w.m1);
    taylor_log_poly(w, degree, &approx, padded + 2)
}

/// Fixed window `[3/4, 9/4]` used for logarithms after range reduction to `[1, 2)`.
pub(crate) static UNIT_WINDOW: LazyLock<LogWindow> =
    LazyLock::new(|| make_log_window(&rat(3, 4), &rat(9, 4)).expect("valid window"));

/// `ln x` within `2^-n` for a positive real given by `query`, where
/// `x >= witness > 0`.
///
/// `x` is written as `2^e * y` with `y` near `[1, 2)`; then
/// `ln x = e ln 2 + ln y` and `ln y` goes through [`log_compose`] on
/// [`UNIT_WINDOW`].
pub(crate) fn ln_of<Q>(query: Q, witness: &BigRational, n: u32) -> Result<Dyadic>
where
    Q: Fn(u32) -> Result<Dyadic>,
{
    if !witness.is_positive() {
        return Err(Error::MissingWitness("logarithm needs a positive lower bound".into()));
    }
    let k0 = (ceil_log2_nonneg(&witness.recip()) + 5).max(8);
    let coarse = query(k0)?;
    let slack = Dyadic::pow2(-(k0 as i64));
    let w_dy = Dyadic::from_big_rational(witness, k0 as i64 + 2);
    if &coarse + &slack < &w_dy - &Dyadic::pow2(-(k0 as i64) - 2) {
        return Err(Error::WitnessViolation(format!(
            "enclosure {} +- 2^-{k0} lies below the positivity witness {witness}",
            coarse.to_decimal(12)
        )));
    }
    let e = coarse.log2_floor().ok_or_else(|| Error::WitnessViolation("logarithm argument is zero".into()))?;

    let reduced = log_compose(
        |_, p| {
            let want = (p as i64 - e).max(0) as u32;
            Ok(query(want)?.mul_pow2(-e))
        },
        &UNIT_WINDOW,
        &Dyadic::zero(),
        n + 2,
    )?;
    if e == 0 {
        return Ok(reduced);
    }
    let extra = 64 - (e.unsigned_abs()).leading_zeros();
    let l2 = ln2().query(n + 1 + extra)?;
    Ok(&(&l2 * &Dyadic::from_int(e)) + &reduced)
}

/// `ln q` for a positive rational within `2^-bits`, by the series
/// `ln y = 2 atanh((y - 1) / (y + 1))` after reducing `y` into `[1, 2)`,
/// summed in fixed point.
pub fn ln_rational(q: &BigRational, bits: u32) -> Dyadic {
    assert!(q.is_positive(), "ln of non-positive rational");
    let mut e = ceil_log2(q);
    if cmp_pow2(q, e) != std::cmp::Ordering::Equal {
        e -= 1;
    }
    let y = q / crate::rational::pow2(e);
    let one = BigRational::one();
    let u = (&y - &one) / (&y + &one);
    let ebits = 64 - e.unsigned_abs().leading_zeros();
    let mut w = bits + 12 + ebits + (32 - bits.leading_zeros());
    loop {
        let (a, ka) = atanh_fixed(&u, w);
        let (l2, k2) = if e == 0 { (BigInt::zero(), 0) } else { atanh_fixed(&rat(1, 3), w) };
        // each atanh carries at most 3k + 4 units of error, doubled below
        let err = 2 * ((3 * ka + 4) + (3 * k2 + 4) * e.unsigned_abs());
        if err <= 1u64 << (w - bits - 1).min(63) {
            let sum = (a + l2 * BigInt::from(e)) << 1usize;
            return Dyadic::new(sum, -(w as i64));
        }
        w += 8;
    }
}

/// `atanh(u) * 2^w` for `0 <= |u| <= 1/3`, and the number of terms used.
fn atanh_fixed(u: &BigRational, w: u32) -> (BigInt, u64) {
    let big_u = Dyadic::from_big_rational(u, w as i64);
    let big_u = scaled(&big_u, w as i64);
    let half = BigInt::one() << (w - 1) as usize;
    let u2 = (&big_u * &big_u + &half) >> w as usize;
    let mut term = big_u.clone();
    let mut sum = big_u;
    let mut k: u64 = 1;
    loop {
        term = (&term * &u2) >> w as usize;
        if term.is_zero() {
            break;
        }
        sum += &term / (2 * k + 1);
        k += 1;
    }
    (sum, k)
}

fn scaled(d: &Dyadic, wp: i64) -> BigInt {
    // d has precision <= wp
    let shift = d.exponent() + wp;
    debug_assert!(shift >= 0);
    d.signed_mantissa() << shift as usize
}
