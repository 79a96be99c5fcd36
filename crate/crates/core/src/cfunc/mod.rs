//! Computable continuous functions on a rational interval.
//!
//! A [`CFunc`] pairs a certified pointwise evaluator with a modulus of
//! continuity and optional certified bounds: a positive lower bound
//! (positivity witness), an upper bound, a Lipschitz bound and a bound on
//! `|f''|` that enables second-order quadrature.

pub mod catalog;
pub mod expr;
pub mod interval;

use std::fmt;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::creal::CReal;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::rational::{ceil_log2_nonneg, ceil_sig, floor_sig, max, min, pow2, rat};
use crate::rigorlog::{self, LogWindow};

pub use expr::parse_expr;

type EvalFn = dyn Fn(&Dyadic, u32) -> Result<Dyadic> + Send + Sync;

/// Precision map `n -> m(n)`: points closer than `2^-m(n)` have values
/// closer than `2^-n`.
#[derive(Clone)]
pub struct ModulusFn(Arc<dyn Fn(u32) -> u32 + Send + Sync>);

impl ModulusFn {
    pub fn new<F: Fn(u32) -> u32 + Send + Sync + 'static>(f: F) -> Self {
        ModulusFn(Arc::new(f))
    }

    /// Modulus of a function with Lipschitz constant `k`:
    /// `m(n) = n + max(0, ceil(log2 k))`, and `m(n) = 0` when `k = 0`.
    pub fn from_lipschitz(k: &BigRational) -> Self {
        if k.is_zero() {
            return ModulusFn::new(|_| 0);
        }
        let shift = ceil_log2_nonneg(k);
        ModulusFn::new(move |n| n + shift)
    }

    pub fn at(&self, n: u32) -> u32 {
        (self.0)(n)
    }

    /// Whether both handles share the same underlying map.
    pub fn same_as(&self, other: &ModulusFn) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for ModulusFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModulusFn(m(0)={}, m(16)={})", self.at(0), self.at(16))
    }
}

#[derive(Clone)]
pub struct CFunc {
    name: String,
    lo: BigRational,
    hi: BigRational,
    eval: Arc<EvalFn>,
    modulus: ModulusFn,
    lipschitz: Option<BigRational>,
    lower: Option<BigRational>,
    upper: Option<BigRational>,
    d2_bound: Option<BigRational>,
    constant: Option<BigRational>,
}

impl fmt::Debug for CFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CFunc")
            .field("name", &self.name)
            .field("domain", &(&self.lo, &self.hi))
            .field("lipschitz", &self.lipschitz)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("d2_bound", &self.d2_bound)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    MinAbove,
    MaxBelow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertifyOutcome {
    Certified,
    Refuted,
    Unresolved,
}

impl fmt::Display for CertifyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertifyOutcome::Certified => "CERTIFIED",
            CertifyOutcome::Refuted => "REFUTED",
            CertifyOutcome::Unresolved => "UNRESOLVED",
        })
    }
}

impl CFunc {
    /// Build from raw parts. `eval(x, n)` must be within `2^-n` of `f(x)`
    /// and `modulus` must be a valid modulus of continuity on `[lo, hi]`.
    pub fn from_parts<F>(name: impl Into<String>, lo: BigRational, hi: BigRational, eval: F, modulus: ModulusFn) -> Result<Self>
    where
        F: Fn(&Dyadic, u32) -> Result<Dyadic> + Send + Sync + 'static,
    {
        if lo > hi {
            return Err(Error::InvalidBracket(format!("domain [{lo}, {hi}] is inverted")));
        }
        Ok(CFunc {
            name: name.into(),
            lo,
            hi,
            eval: Arc::new(eval),
            modulus,
            lipschitz: None,
            lower: None,
            upper: None,
            d2_bound: None,
            constant: None,
        })
    }

    pub fn constant(c: BigRational, lo: BigRational, hi: BigRational) -> Result<Self> {
        let v = c.clone();
        let mut f = Self::from_parts(
            c.to_string(),
            lo,
            hi,
            move |_, n| Ok(Dyadic::from_big_rational(&v, n as i64)),
            ModulusFn::from_lipschitz(&BigRational::zero()),
        )?;
        f.lipschitz = Some(BigRational::zero());
        f.d2_bound = Some(BigRational::zero());
        f.lower = Some(c.clone());
        f.upper = Some(c.clone());
        f.constant = Some(c);
        Ok(f)
    }

    /// Parse an expression in the variable `f` over `[lo, hi]`, deriving the
    /// modulus, bounds and curvature bound by interval analysis.
    pub fn parse(src: &str, lo: BigRational, hi: BigRational) -> Result<Self> {
        let e = parse_expr(src)?;
        if let Some(c) = e.as_constant() {
            let mut f = Self::constant(c.clone(), lo, hi)?;
            f.name = src.trim().to_string();
            return Ok(f);
        }
        if lo > hi {
            return Err(Error::InvalidBracket(format!("domain [{lo}, {hi}] is inverted")));
        }
        let jet = e.jet(&lo, &hi)?;
        let k = jet.d1.abs_max();
        let expr = Arc::new(e);
        let ev = expr.clone();
        let mut f = Self::from_parts(src.trim(), lo, hi, move |x, n| ev.eval(x, n), ModulusFn::from_lipschitz(&k))?;
        f.lipschitz = Some(k);
        f.d2_bound = Some(jet.d2.abs_max());
        f.lower = Some(jet.v.lo);
        f.upper = Some(jet.v.hi);
        Ok(f)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn domain(&self) -> (&BigRational, &BigRational) {
        (&self.lo, &self.hi)
    }

    pub fn modulus(&self) -> &ModulusFn {
        &self.modulus
    }

    pub fn lipschitz(&self) -> Option<&BigRational> {
        self.lipschitz.as_ref()
    }

    /// Certified positive lower bound, if one is known.
    pub fn pos_witness(&self) -> Option<&BigRational> {
        self.lower.as_ref().filter(|l| l.is_positive())
    }

    pub fn lower_bound(&self) -> Option<&BigRational> {
        self.lower.as_ref()
    }

    pub fn upper_bound(&self) -> Option<&BigRational> {
        self.upper.as_ref()
    }

    pub fn d2_bound(&self) -> Option<&BigRational> {
        self.d2_bound.as_ref()
    }

    /// Exact value when the function is a rational constant.
    pub fn constant_value(&self) -> Option<&BigRational> {
        self.constant.as_ref()
    }

    /// Attach a caller-certified positive lower bound.
    pub fn with_pos_witness(mut self, c: BigRational) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::MissingWitness(format!("positivity witness must be > 0, got {c}")));
        }
        self.lower = Some(match self.lower {
            Some(l) => max(&l, &c),
            None => c,
        });
        Ok(self)
    }

    pub fn with_upper_bound(mut self, c: BigRational) -> Self {
        self.upper = Some(match self.upper {
            Some(u) => min(&u, &c),
            None => c,
        });
        self
    }

    pub fn with_lipschitz(mut self, k: BigRational) -> Self {
        self.lipschitz = Some(k);
        self
    }

    pub fn with_d2_bound(mut self, d2: BigRational) -> Self {
        self.d2_bound = Some(d2);
        self
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    /// `f(x)` within `2^-n`.
    pub fn eval(&self, x: &Dyadic, n: u32) -> Result<Dyadic> {
        if !self.contains(&x.to_rational()) {
            return Err(self.out_of_domain(x));
        }
        (self.eval)(x, n)
    }

    /// Evaluation without the domain check, for callers that build grids
    /// inside the domain.
    pub(crate) fn eval_unchecked(&self, x: &Dyadic, n: u32) -> Result<Dyadic> {
        (self.eval)(x, n)
    }

    fn out_of_domain(&self, x: &Dyadic) -> Error {
        Error::OutOfDomain { point: x.to_string(), lo: self.lo.to_string(), hi: self.hi.to_string() }
    }

    /// `q * f`.
    pub fn scale(&self, q: &BigRational) -> CFunc {
        if q.is_zero() {
            return CFunc::constant(BigRational::zero(), self.lo.clone(), self.hi.clone()).expect("valid domain");
        }
        let s = ceil_log2_nonneg(&q.abs());
        let inner = self.clone();
        let qq = q.clone();
        let exact = Dyadic::try_from_rational(q);
        let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
            let v = inner.eval_unchecked(x, n + 1 + s)?;
            match &exact {
                Some(d) => Ok((&v * d).round(n + 1)),
                None => {
                    let p = v.to_rational() * &qq;
                    Dyadic::round_ratio(p.numer(), p.denom(), n as i64 + 1)
                }
            }
        };
        let m = self.modulus.clone();
        let mut out = CFunc::from_parts(
            format!("({q})*{}", self.name),
            self.lo.clone(),
            self.hi.clone(),
            eval,
            ModulusFn::new(move |n| m.at(n + s)),
        )
        .expect("valid domain");
        let qa = q.abs();
        out.lipschitz = self.lipschitz.as_ref().map(|k| k * &qa);
        out.d2_bound = self.d2_bound.as_ref().map(|d| d * &qa);
        out.constant = self.constant.as_ref().map(|c| c * q);
        let (l, u) = (self.lower.as_ref().map(|l| l * q), self.upper.as_ref().map(|u| u * q));
        (out.lower, out.upper) = if q.is_positive() { (l, u) } else { (u, l) };
        out
    }

    /// `f + r` for a rational `r`.
    pub fn add_rational(&self, r: &BigRational) -> CFunc {
        let inner = self.clone();
        let exact = Dyadic::try_from_rational(r);
        let rr = r.clone();
        let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
            match &exact {
                Some(d) => Ok(&inner.eval_unchecked(x, n)? + d),
                None => {
                    let v = inner.eval_unchecked(x, n + 1)?;
                    Ok(&v + &Dyadic::from_big_rational(&rr, n as i64 + 1))
                }
            }
        };
        let mut out = CFunc::from_parts(
            format!("{}+({r})", self.name),
            self.lo.clone(),
            self.hi.clone(),
            eval,
            self.modulus.clone(),
        )
        .expect("valid domain");
        out.lipschitz = self.lipschitz.clone();
        out.d2_bound = self.d2_bound.clone();
        out.constant = self.constant.as_ref().map(|c| c + r);
        out.lower = self.lower.as_ref().map(|l| l + r);
        out.upper = self.upper.as_ref().map(|u| u + r);
        out
    }

    fn same_domain(&self, g: &CFunc) -> Result<()> {
        if self.lo != g.lo || self.hi != g.hi {
            return Err(Error::InvalidArgument(format!(
                "domains differ: [{}, {}] vs [{}, {}]",
                self.lo, self.hi, g.lo, g.hi
            )));
        }
        Ok(())
    }

    /// `f + g` on a common domain.
    pub fn add(&self, g: &CFunc) -> Result<CFunc> {
        self.same_domain(g)?;
        let (a, b) = (self.clone(), g.clone());
        let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
            Ok(&a.eval_unchecked(x, n + 1)? + &b.eval_unchecked(x, n + 1)?)
        };
        let (ma, mb) = (self.modulus.clone(), g.modulus.clone());
        let mut out = CFunc::from_parts(
            format!("{}+{}", self.name, g.name),
            self.lo.clone(),
            self.hi.clone(),
            eval,
            ModulusFn::new(move |n| ma.at(n + 1).max(mb.at(n + 1))),
        )?;
        let both = |x: &Option<BigRational>, y: &Option<BigRational>| Some(x.as_ref()? + y.as_ref()?);
        out.lipschitz = both(&self.lipschitz, &g.lipschitz);
        out.d2_bound = both(&self.d2_bound, &g.d2_bound);
        out.lower = both(&self.lower, &g.lower);
        out.upper = both(&self.upper, &g.upper);
        out.constant = both(&self.constant, &g.constant);
        Ok(out)
    }

    /// Certified `sup |f|`, if bounds are known.
    pub fn abs_bound(&self) -> Option<BigRational> {
        Some(max(&self.lower.as_ref()?.abs(), &self.upper.as_ref()?.abs()))
    }

    /// `f * g` on a common domain. Both factors need certified bounds.
    pub fn mul(&self, g: &CFunc) -> Result<CFunc> {
        self.same_domain(g)?;
        let ba = self.abs_bound().ok_or_else(|| Error::MissingWitness(format!("bounds of {}", self.name)))?;
        let bb = g.abs_bound().ok_or_else(|| Error::MissingWitness(format!("bounds of {}", g.name)))?;
        let one = BigRational::one();
        let ea = 2 + ceil_log2_nonneg(&(&one + &bb));
        let eb = 2 + ceil_log2_nonneg(&(&one + &ba));
        let (a, b) = (self.clone(), g.clone());
        let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
            Ok((&a.eval_unchecked(x, n + ea)? * &b.eval_unchecked(x, n + eb)?).round(n + 1))
        };
        let (sa, sb) = (1 + ceil_log2_nonneg(&bb), 1 + ceil_log2_nonneg(&ba));
        let (ma, mb) = (self.modulus.clone(), g.modulus.clone());
        let mut out = CFunc::from_parts(
            format!("({})*({})", self.name, g.name),
            self.lo.clone(),
            self.hi.clone(),
            eval,
            ModulusFn::new(move |n| ma.at(n + sa).max(mb.at(n + sb))),
        )?;
        if let (Some(ka), Some(kb)) = (&self.lipschitz, &g.lipschitz) {
            out.lipschitz = Some(&ba * kb + &bb * ka);
            if let (Some(da), Some(db)) = (&self.d2_bound, &g.d2_bound) {
                out.d2_bound = Some(da * &bb + BigRational::from_integer(2.into()) * ka * kb + &ba * db);
            }
        }
        let (la, ua, lb, ub) = (self.lower.clone().unwrap(), self.upper.clone().unwrap(), g.lower.clone().unwrap(), g.upper.clone().unwrap());
        let c = [&la * &lb, &la * &ub, &ua * &lb, &ua * &ub];
        out.lower = Some(c.iter().skip(1).fold(c[0].clone(), |s, v| min(&s, v)));
        out.upper = Some(c.iter().skip(1).fold(c[0].clone(), |s, v| max(&s, v)));
        out.constant = match (&self.constant, &g.constant) {
            (Some(x), Some(y)) => Some(x * y),
            _ => None,
        };
        Ok(out)
    }

    /// `x -> f(s x + t)` on `[lo, hi]`, which `s x + t` must map into the domain of `f`.
    pub fn affine_arg(&self, s: &BigRational, t: &BigRational, lo: BigRational, hi: BigRational) -> Result<CFunc> {
        let (y0, y1) = (s * &lo + t, s * &hi + t);
        let (ylo, yhi) = (min(&y0, &y1), max(&y0, &y1));
        if !self.contains(&ylo) || !self.contains(&yhi) {
            return Err(Error::OutOfDomain {
                point: format!("[{ylo}, {yhi}]"),
                lo: self.lo.to_string(),
                hi: self.hi.to_string(),
            });
        }
        let shift = ceil_log2_nonneg(&s.abs());
        let inner = self.clone();
        let (ss, tt) = (s.clone(), t.clone());
        let m = self.modulus.clone();
        let m_eval = m.clone();
        let (flo, fhi) = (self.lo.clone(), self.hi.clone());
        let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
            let y = &ss * x.to_rational() + &tt;
            let yd = match Dyadic::try_from_rational(&y) {
                Some(d) => d,
                None => {
                    // perturb within the modulus tolerance and stay inside the domain
                    let k = m_eval.at(n + 1) as i64 + 1;
                    let mut d = Dyadic::from_big_rational(&y, k);
                    if d.to_rational() < flo {
                        d = Dyadic::ceil_ratio(flo.numer(), flo.denom(), k)?;
                    }
                    if d.to_rational() > fhi {
                        d = Dyadic::floor_ratio(fhi.numer(), fhi.denom(), k)?;
                    }
                    d
                }
            };
            inner.eval_unchecked(&yd, n + 1)
        };
        let mut out = CFunc::from_parts(
            format!("{}∘({s}x+{t})", self.name),
            lo,
            hi,
            eval,
            ModulusFn::new(move |n| m.at(n) + shift),
        )?;
        let sa = s.abs();
        out.lipschitz = self.lipschitz.as_ref().map(|k| k * &sa);
        out.d2_bound = self.d2_bound.as_ref().map(|d| d * &sa * &sa);
        out.lower = self.lower.clone();
        out.upper = self.upper.clone();
        out.constant = self.constant.clone();
        Ok(out)
    }

    /// `x -> max(0, L - f(x))`. Clipping is 1-Lipschitz, so the modulus of
    /// `f` is reused unchanged.
    pub fn pos_part_of_level_minus(&self, level: &CReal) -> CFunc {
        let inner = self.clone();
        let lv = level.clone();
        let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
            let v = &lv.query(n + 1)? - &inner.eval_unchecked(x, n + 1)?;
            Ok(if v.is_negative() { Dyadic::zero() } else { v })
        };
        let mut out = CFunc::from_parts(
            format!("[L-{}]+", self.name),
            self.lo.clone(),
            self.hi.clone(),
            eval,
            self.modulus.clone(),
        )
        .expect("valid domain");
        out.lipschitz = self.lipschitz.clone();
        out.lower = Some(BigRational::zero());
        if let (Some(l), Ok(bound)) = (&self.lower, level.abs_upper()) {
            out.upper = Some(max(&BigRational::zero(), &(bound - l)));
        }
        out
    }

    /// Log window used by [`CFunc::ln_compose`]: `[3c/8, C + 2]` for
    /// bounds `c <= f <= C`.
    pub fn log_window(&self) -> Result<LogWindow> {
        let c = self.pos_witness().ok_or_else(|| Error::MissingWitness(format!("pos_witness of {}", self.name)))?;
        let u = self.upper.as_ref().ok_or_else(|| Error::MissingWitness(format!("upper_bound of {}", self.name)))?;
        rigorlog::make_log_window(&(c * rat(3, 8)), &(u + rat(2, 1)))
    }

    /// `ln f`, evaluated through the Taylor-polynomial logarithm on the
    /// window from [`CFunc::log_window`].
    pub fn ln_compose(&self) -> Result<CFunc> {
        let w = Arc::new(self.log_window()?);
        let c = self.pos_witness().expect("checked by log_window").clone();
        let inner = self.clone();
        let win = w.clone();
        let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
            rigorlog::log_compose(|p, k| inner.eval_unchecked(p, k), &win, x, n)
        };
        let m = self.modulus.clone();
        let m3 = w.m3();
        let lip = self.lipschitz.as_ref().map(|k| k / &c);
        let lip_shift = lip.as_ref().map(ceil_log2_nonneg);
        let is_const = lip.as_ref().is_some_and(|k| k.is_zero());
        let modulus = ModulusFn::new(move |n| {
            let via_window = m.at(n + m3);
            match lip_shift {
                _ if is_const => 0,
                Some(s) => via_window.min(n + s),
                None => via_window,
            }
        });
        let mut out = CFunc::from_parts(format!("ln({})", self.name), self.lo.clone(), self.hi.clone(), eval, modulus)?;
        if let (Some(k), Some(d2)) = (&self.lipschitz, &self.d2_bound) {
            let kc = k / &c;
            out.d2_bound = Some(d2 / &c + &kc * &kc);
        }
        out.lipschitz = lip;
        let lo = rigorlog::ln_rational(&c, 64).to_rational() - pow2(-63);
        out.lower = Some(floor_sig(&lo, 64));
        if let Some(u) = &self.upper {
            let hi = rigorlog::ln_rational(u, 64).to_rational() + pow2(-63);
            out.upper = Some(ceil_sig(&hi, 64));
        }
        Ok(out)
    }
}

/// Grid-sample `f` at spacing `2^-m(n)` with evaluation precision `n` and
/// decide `min f >= t` or `max f <= t`.
pub fn certify_bounds(f: &CFunc, mode: BoundMode, threshold: &BigRational, n: u32) -> Result<CertifyOutcome> {
    let n = n.max(1);
    let eps = Dyadic::pow2(-(n as i64));
    let two_eps = eps.mul_pow2(1);
    let t = Dyadic::from_big_rational(threshold, n as i64 + 8);
    let t_err = Dyadic::pow2(-(n as i64) - 8);
    let points = grid_points(f, f.modulus.at(n))?;
    let mut resolved = true;
    for x in points {
        let v = f.eval_unchecked(&x, n)?;
        // work with v - t (or t - v) and absorb the rounding of t
        let d = match mode {
            BoundMode::MinAbove => &v - &t,
            BoundMode::MaxBelow => &t - &v,
        };
        if d < -(&eps + &t_err) {
            return Ok(CertifyOutcome::Refuted);
        }
        if d < &two_eps + &t_err {
            resolved = false;
        }
    }
    Ok(if resolved { CertifyOutcome::Certified } else { CertifyOutcome::Unresolved })
}

/// Dyadic points inside the domain such that every domain point is within
/// `2^-m` of one of them.
fn grid_points(f: &CFunc, m: u32) -> Result<Vec<Dyadic>> {
    let (lo, hi) = f.domain();
    let k = m as i64 + 1;
    let start = Dyadic::ceil_ratio(lo.numer(), lo.denom(), k)?;
    let end = Dyadic::floor_ratio(hi.numer(), hi.denom(), k)?;
    let h = Dyadic::pow2(-(m as i64));
    let mut pts = Vec::new();
    if start > end {
        // domain narrower than the grid step
        pts.push(Dyadic::from_big_rational(&((lo + hi) / BigRational::from_integer(2.into())), k + 8));
        return Ok(pts);
    }
    let span = (&end - &start).to_rational() / h.to_rational();
    let count = crate::rational::ceil_int(&span);
    let count: u64 = num_traits::ToPrimitive::to_u64(&count)
        .filter(|c| *c < 1 << 32)
        .ok_or_else(|| Error::CellLimit { requested: count.to_string(), limit: 1 << 32 })?;
    let mut x = start.clone();
    for _ in 0..count {
        pts.push(x.clone());
        x = &x + &h;
    }
    pts.push(end);
    Ok(pts)
}
