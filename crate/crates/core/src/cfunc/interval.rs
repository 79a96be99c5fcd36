//! Outward-rounded rational intervals for bounding an expression and its
//! first two derivatives over the whole domain.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::dyadic::Dyadic;
use crate::elementary;
use crate::error::{Error, Result};
use crate::rational::{ceil_sig, floor_sig, max, min, pow2};

const SIG: u32 = 64;
const EPS_EXP: i64 = -70;

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl Interval {
    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo: floor_sig(&lo, SIG), hi: ceil_sig(&hi, SIG) }
    }

    pub fn point(v: BigRational) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn zero() -> Self {
        Self::point(BigRational::zero())
    }

    pub fn contains_zero(&self) -> bool {
        !self.lo.is_positive() && !self.hi.is_negative()
    }

    pub fn abs_max(&self) -> BigRational {
        max(&self.lo.abs(), &self.hi.abs())
    }

    pub fn add(&self, o: &Interval) -> Interval {
        Interval::new(&self.lo + &o.lo, &self.hi + &o.hi)
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        Interval::new(&self.lo - &o.hi, &self.hi - &o.lo)
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -&self.hi, hi: -&self.lo }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let c = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = c.iter().skip(1).fold(c[0].clone(), |a, b| min(&a, b));
        let hi = c.iter().skip(1).fold(c[0].clone(), |a, b| max(&a, b));
        Interval::new(lo, hi)
    }

    pub fn scale(&self, k: &BigRational) -> Interval {
        self.mul(&Interval::point(k.clone()))
    }

    pub fn recip(&self) -> Result<Interval> {
        if self.contains_zero() {
            return Err(Error::Unsupported(
                "division by a subexpression that is not bounded away from zero on the domain".into(),
            ));
        }
        Ok(Interval::new(self.hi.recip(), self.lo.recip()))
    }

    /// Symmetric interval `[-r, r]`.
    pub fn symmetric(r: BigRational) -> Interval {
        Interval::new(-r.clone(), r)
    }

    fn mid_rad(&self) -> (Dyadic, BigRational) {
        let mid = (&self.lo + &self.hi) / BigRational::from_integer(2.into());
        let md = Dyadic::from_big_rational(&mid, -EPS_EXP);
        let rad = (&self.hi - &self.lo) / BigRational::from_integer(2.into()) + pow2(EPS_EXP);
        (md, rad)
    }

    pub fn sin(&self) -> Result<Interval> {
        let (m, r) = self.mid_rad();
        let s = elementary::sin(&m, 64)?.to_rational();
        Ok(clamp_unit(s, r))
    }

    pub fn cos(&self) -> Result<Interval> {
        let (m, r) = self.mid_rad();
        let c = elementary::cos(&m, 64)?.to_rational();
        Ok(clamp_unit(c, r))
    }

    pub fn exp(&self) -> Result<Interval> {
        let e = pow2(-64);
        let lo = elementary::exp(&Dyadic::from_big_rational(&self.lo, 80).floor_to(64), 64)?.to_rational() - &e;
        let hi = elementary::exp(&Dyadic::from_big_rational(&self.hi, 80).ceil_to(64), 64)?.to_rational() + &e;
        Ok(Interval::new(max(&lo, &BigRational::zero()), hi))
    }

    pub fn sqrt(&self) -> Result<Interval> {
        if !self.lo.is_positive() {
            return Err(Error::Unsupported(
                "sqrt of a subexpression that is not bounded away from zero on the domain".into(),
            ));
        }
        let lo = elementary::sqrt_floor(&Dyadic::from_big_rational(&self.lo, 80).floor_to(80), 64)?.to_rational();
        let hi = elementary::sqrt_floor(&Dyadic::from_big_rational(&self.hi, 80).ceil_to(80), 64)?.to_rational()
            + pow2(-64);
        Ok(Interval::new(lo, hi))
    }

    pub fn ln(&self) -> Result<Interval> {
        if !self.lo.is_positive() {
            return Err(Error::Unsupported(
                "ln of a subexpression that is not bounded away from zero on the domain".into(),
            ));
        }
        let e = pow2(-64);
        let lo = Dyadic::from_big_rational(&self.lo, 90).floor_to(90);
        let lo = if lo.is_positive() { lo } else { Dyadic::pow2(-90) };
        let lo = elementary::ln(&lo, 64)?.to_rational() - &e;
        let hi = elementary::ln(&Dyadic::from_big_rational(&self.hi, 90).ceil_to(90), 64)?.to_rational() + &e;
        Ok(Interval::new(lo, hi))
    }
}

fn clamp_unit(center: BigRational, rad: BigRational) -> Interval {
    let one = BigRational::from_integer(1.into());
    let slack = pow2(-63);
    let lo = max(&(&center - &rad - &slack), &-one.clone());
    let hi = min(&(&center + &rad + &slack), &one);
    Interval::new(lo, hi)
}

/// Enclosures of `g`, `g'` and `g''` over the domain.
#[derive(Debug, Clone)]
pub struct Jet {
    pub v: Interval,
    pub d1: Interval,
    pub d2: Interval,
}

impl Jet {
    pub fn var(lo: &BigRational, hi: &BigRational) -> Jet {
        Jet {
            v: Interval::new(lo.clone(), hi.clone()),
            d1: Interval::point(BigRational::from_integer(1.into())),
            d2: Interval::zero(),
        }
    }

    pub fn constant(v: Interval) -> Jet {
        Jet { v, d1: Interval::zero(), d2: Interval::zero() }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { v: self.v.add(&o.v), d1: self.d1.add(&o.d1), d2: self.d2.add(&o.d2) }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet { v: self.v.sub(&o.v), d1: self.d1.sub(&o.d1), d2: self.d2.sub(&o.d2) }
    }

    pub fn neg(&self) -> Jet {
        Jet { v: self.v.neg(), d1: self.d1.neg(), d2: self.d2.neg() }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let two = BigRational::from_integer(2.into());
        Jet {
            v: self.v.mul(&o.v),
            d1: self.d1.mul(&o.v).add(&self.v.mul(&o.d1)),
            d2: self.d2.mul(&o.v).add(&self.d1.mul(&o.d1).scale(&two)).add(&self.v.mul(&o.d2)),
        }
    }

    pub fn recip(&self) -> Result<Jet> {
        let r = self.v.recip()?;
        let r2 = r.mul(&r);
        let two = BigRational::from_integer(2.into());
        Ok(Jet {
            d1: self.d1.mul(&r2).neg(),
            d2: self.d1.mul(&self.d1).mul(&r2).mul(&r).scale(&two).sub(&self.d2.mul(&r2)),
            v: r,
        })
    }

    /// Chain rule with outer value `fv`, outer derivative `f1`, and outer
    /// second derivative `f2`, all enclosed over the inner range.
    fn chain(&self, fv: Interval, f1: Interval, f2: Interval) -> Jet {
        Jet { v: fv, d1: f1.mul(&self.d1), d2: f2.mul(&self.d1.mul(&self.d1)).add(&f1.mul(&self.d2)) }
    }

    pub fn sin(&self) -> Result<Jet> {
        let s = self.v.sin()?;
        let c = self.v.cos()?;
        Ok(self.chain(s.clone(), c, s.neg()))
    }

    pub fn cos(&self) -> Result<Jet> {
        let s = self.v.sin()?;
        let c = self.v.cos()?;
        Ok(self.chain(c.clone(), s.neg(), c.neg()))
    }

    pub fn exp(&self) -> Result<Jet> {
        let e = self.v.exp()?;
        Ok(self.chain(e.clone(), e.clone(), e))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        let s = self.v.sqrt()?;
        let inv = s.recip()?;
        let half = BigRational::new(1.into(), 2.into());
        let quarter = BigRational::new(1.into(), 4.into());
        let f1 = inv.scale(&half);
        let f2 = inv.mul(&inv).mul(&inv).scale(&quarter).neg();
        Ok(self.chain(s, f1, f2))
    }

    pub fn ln(&self) -> Result<Jet> {
        let l = self.v.ln()?;
        let inv = self.v.recip()?;
        let f2 = inv.mul(&inv).neg();
        Ok(self.chain(l, inv, f2))
    }
}
