//! Computable reals as binary-converging approximation processes.
//!
//! A [`CReal`] wraps a process `n -> d_n` with `|x - d_n| <= 2^-n`.
//! Results are memoized at the highest precision requested so far, and a
//! query at lower precision is answered from the memo.

use std::fmt;
use std::sync::{Arc, LazyLock, Mutex};

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::rational::{ceil_log2_nonneg, ceil_log2};
use crate::rigorlog::{self, UNIT_WINDOW};

type Process = dyn Fn(u32) -> Result<Dyadic> + Send + Sync;

struct Node {
    process: Box<Process>,
    memo: Mutex<Option<(u32, Dyadic)>>,
    magnitude_hint: Option<BigRational>,
}

#[derive(Clone)]
pub struct CReal {
    node: Arc<Node>,
}

/// Certified rational lower bound on a positive real.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveWitness(BigRational);

impl PositiveWitness {
    pub fn new(lower: BigRational) -> Result<Self> {
        if lower.is_positive() {
            Ok(PositiveWitness(lower))
        } else {
            Err(Error::MissingWitness(format!("positivity witness must be > 0, got {lower}")))
        }
    }

    pub fn lower(&self) -> &BigRational {
        &self.0
    }
}

/// Outcome of [`CReal::compare_with_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapOrdering {
    Less,
    Greater,
    WithinGap,
}

impl CReal {
    /// Wrap a process. The caller guarantees `|x - process(n)| <= 2^-n`.
    pub fn from_process<F>(process: F) -> Self
    where
        F: Fn(u32) -> Result<Dyadic> + Send + Sync + 'static,
    {
        CReal { node: Arc::new(Node { process: Box::new(process), memo: Mutex::new(None), magnitude_hint: None }) }
    }

    pub fn from_rational(q: BigRational) -> Self {
        if let Some(d) = Dyadic::try_from_rational(&q) {
            return Self::from_dyadic(d);
        }
        let hint = q.abs();
        Self::from_process(move |n| Dyadic::round_ratio(q.numer(), q.denom(), n as i64)).with_magnitude_hint(hint)
    }

    pub fn from_dyadic(d: Dyadic) -> Self {
        let hint = d.abs().to_rational();
        Self::from_process(move |_| Ok(d.clone())).with_magnitude_hint(hint)
    }

    pub fn zero() -> Self {
        Self::from_dyadic(Dyadic::zero())
    }

    pub fn with_magnitude_hint(self, bound: BigRational) -> Self {
        match Arc::try_unwrap(self.node) {
            Ok(mut node) => {
                node.magnitude_hint = Some(bound);
                CReal { node: Arc::new(node) }
            }
            Err(node) => {
                let inner = CReal { node };
                let mut wrapped = Self::from_process(move |n| inner.query(n));
                if let Some(n) = Arc::get_mut(&mut wrapped.node) {
                    n.magnitude_hint = Some(bound);
                }
                wrapped
            }
        }
    }

    pub fn magnitude_hint(&self) -> Option<&BigRational> {
        self.node.magnitude_hint.as_ref()
    }

    /// A dyadic within `2^-n` of the value.
    pub fn query(&self, n: u32) -> Result<Dyadic> {
        if let Some((p, v)) = self.node.memo.lock().expect("poisoned").as_ref() {
            if *p >= n {
                return Ok(v.clone());
            }
        }
        let v = (self.node.process)(n)?;
        let mut memo = self.node.memo.lock().expect("poisoned");
        if memo.as_ref().is_none_or(|(p, _)| *p < n) {
            *memo = Some((n, v.clone()));
        }
        Ok(v)
    }

    /// Rational `B` with `|x| <= B`.
    pub fn abs_upper(&self) -> Result<BigRational> {
        if let Some(h) = self.magnitude_hint() {
            return Ok(h.clone());
        }
        let v = self.query(4)?;
        Ok(v.abs().to_rational() + crate::rational::pow2(-4))
    }

    pub fn add(&self, other: &CReal) -> CReal {
        let (a, b) = (self.clone(), other.clone());
        CReal::from_process(move |n| Ok(&a.query(n + 1)? + &b.query(n + 1)?))
    }

    pub fn sub(&self, other: &CReal) -> CReal {
        let (a, b) = (self.clone(), other.clone());
        CReal::from_process(move |n| Ok(&a.query(n + 1)? - &b.query(n + 1)?))
    }

    pub fn neg(&self) -> CReal {
        let a = self.clone();
        CReal::from_process(move |n| Ok(-a.query(n)?))
    }

    /// Product. Both factors are first bounded from a 4-bit query, then
    /// each is re-queried at `n + 2 + ceil(log2(1 + bound of the other))`.
    pub fn mul(&self, other: &CReal) -> CReal {
        let (a, b) = (self.clone(), other.clone());
        CReal::from_process(move |n| {
            let one = BigRational::from_integer(1.into());
            let bound_a = a.query(4)?.abs().to_rational() + crate::rational::pow2(-4);
            let bound_b = b.query(4)?.abs().to_rational() + crate::rational::pow2(-4);
            let na = n + 2 + ceil_log2_nonneg(&(&one + &bound_b));
            let nb = n + 2 + ceil_log2_nonneg(&(&one + &bound_a));
            Ok((&a.query(na)? * &b.query(nb)?).round(n + 1))
        })
    }

    pub fn mul_rational(&self, q: &BigRational) -> CReal {
        let a = self.clone();
        let q = q.clone();
        let extra = ceil_log2_nonneg(&q.abs());
        CReal::from_process(move |n| {
            let v = a.query(n + 1 + extra)?;
            let num = v.to_rational() * &q;
            Dyadic::round_ratio(num.numer(), num.denom(), n as i64 + 1)
        })
    }

    pub fn div_rational(&self, q: &BigRational) -> Result<CReal> {
        if q.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let a = self.clone();
        let q = q.clone();
        let extra = ceil_log2_nonneg(&q.abs().recip());
        Ok(CReal::from_process(move |n| {
            let v = a.query(n + 1 + extra)?;
            let num = v.to_rational() / &q;
            Dyadic::round_ratio(num.numer(), num.denom(), n as i64 + 1)
        }))
    }

    /// Natural logarithm, given `x >= witness > 0`.
    pub fn ln(&self, witness: &PositiveWitness) -> CReal {
        let a = self.clone();
        let w = witness.lower().clone();
        CReal::from_process(move |n| rigorlog::ln_of(|k| a.query(k), &w, n))
    }

    /// Three-way comparison that gives up only once `|a - b| <= gap` is certain.
    /// Queries at precisions `1, 2, ..., ceil(log2(1/gap)) + 2`.
    pub fn compare_with_gap(&self, other: &CReal, gap: &BigRational) -> Result<GapOrdering> {
        if !gap.is_positive() {
            return Err(Error::InvalidArgument("gap must be positive".into()));
        }
        let last = (ceil_log2(&gap.recip()) + 2).max(1) as u32;
        let gap_dy_floor = Dyadic::floor_ratio(gap.numer(), gap.denom(), last as i64 + 2)?;
        for n in 1..=last {
            let d = &self.query(n)? - &other.query(n)?;
            let err = Dyadic::pow2(1 - n as i64);
            if d > err {
                return Ok(GapOrdering::Greater);
            }
            if d < -&err {
                return Ok(GapOrdering::Less);
            }
            if &d.abs() + &err <= gap_dy_floor {
                return Ok(GapOrdering::WithinGap);
            }
        }
        // unreachable by the choice of `last`: |d| <= 2^(1-last) and 4 * 2^-last <= gap
        Ok(GapOrdering::WithinGap)
    }

    pub fn pi() -> CReal {
        PI.clone()
    }
}

impl fmt::Debug for CReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node.memo.lock().expect("poisoned").as_ref() {
            Some((p, v)) => write!(f, "CReal({} +- 2^-{p})", v.to_decimal(((*p as usize) * 3 / 10).max(1))),
            None => f.write_str("CReal(<unevaluated>)"),
        }
    }
}

static LN2: LazyLock<CReal> = LazyLock::new(|| {
    CReal::from_process(|n| rigorlog::log_compose(|_, _| Ok(Dyadic::from_int(2)), &UNIT_WINDOW, &Dyadic::zero(), n))
});

static PI: LazyLock<CReal> = LazyLock::new(|| CReal::from_process(|n| Ok(crate::elementary::pi(n))));

/// `ln 2`, computed through the Taylor window `[3/4, 9/4]` and memoized.
pub fn ln2() -> CReal {
    LN2.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use num_bigint::BigInt;

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn make_from_sources() {
        assert_eq!(CReal::from_rational(rat(1, 3)).query(4).unwrap(), Dyadic::new(big(5), -4));
        let q = CReal::from_dyadic(Dyadic::new(big(3), -2));
        for n in [0, 5, 60] {
            assert_eq!(q.query(n).unwrap(), Dyadic::new(big(3), -2));
        }
        assert_eq!(CReal::zero().query(60).unwrap(), Dyadic::zero());
    }

    #[test]
    fn lifted_arith_examples() {
        let third = CReal::from_rational(rat(1, 3));
        let two_thirds = CReal::from_rational(rat(2, 3));
        let half = CReal::from_rational(rat(1, 2));
        for n in [1u32, 8, 30, 64] {
            let s = third.add(&two_thirds).query(n).unwrap().to_rational();
            assert!((s - int(1)).abs() <= crate::rational::pow2(-(n as i64)));
            let p = half.mul(&half).query(n).unwrap().to_rational();
            assert!((p - rat(1, 4)).abs() <= crate::rational::pow2(-(n as i64)));
        }
        let q = CReal::from_rational(int(1)).div_rational(&int(3)).unwrap().query(4).unwrap();
        assert!((q.to_rational() - rat(1, 3)).abs() <= rat(1, 16));
        assert!(CReal::zero().div_rational(&int(0)).is_err());
    }

    #[test]
    fn gap_comparison_examples() {
        let zero = CReal::from_rational(int(0));
        let one = CReal::from_rational(int(1));
        assert_eq!(zero.compare_with_gap(&one, &rat(1, 4)).unwrap(), GapOrdering::Less);
        assert_eq!(one.compare_with_gap(&one, &rat(1, 4)).unwrap(), GapOrdering::WithinGap);
        let nine_eighths = CReal::from_rational(rat(9, 8));
        assert_eq!(one.compare_with_gap(&nine_eighths, &rat(1, 2)).unwrap(), GapOrdering::WithinGap);
        assert_eq!(one.compare_with_gap(&zero, &rat(1, 4)).unwrap(), GapOrdering::Greater);
    }

    #[test]
    fn ln_of_one_is_zero() {
        let w = PositiveWitness::new(int(1)).unwrap();
        let l = CReal::from_rational(int(1)).ln(&w);
        for n in [0, 10, 40] {
            assert!(l.query(n).unwrap().abs() <= Dyadic::pow2(-(n as i64)));
        }
    }

    #[test]
    fn ln_witness_violation_reported() {
        let w = PositiveWitness::new(int(1)).unwrap();
        let l = CReal::from_rational(rat(1, 4)).ln(&w);
        assert!(matches!(l.query(8), Err(Error::WitnessViolation(_))));
        assert!(PositiveWitness::new(int(0)).is_err());
    }
}
