//! Validated midpoint quadrature.
//!
//! Two routes share one contract, `|integral - result| <= 2^-n`:
//!
//! * the modulus route uses `K = ceil((b - a) 2^m(n + 2 + s))` equal cells,
//!   where `s = max(0, ceil(log2(b - a)))`, so every cell is narrow enough
//!   for the modulus to bound the oscillation;
//! * the smooth route uses a curvature bound `|f''| <= D2` and picks `K`
//!   with `(b - a)^3 D2 / (24 K^2) <= 2^-(n+1)`.
//!
//! Grids are uniform and cell counts depend only on `(f, a, b, n)`, so
//! work counts are reproducible.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rayon::prelude::*;

use crate::cfunc::CFunc;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::rational::{ceil_int, ceil_log2, ceil_log2_nonneg, pow2};
use crate::work::WorkMeter;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Modulus,
    Smooth,
}

/// Evaluation plan of a uniform midpoint rule.
#[derive(Debug, Clone)]
pub struct Plan {
    pub a: BigRational,
    pub b: BigRational,
    pub cells: u64,
    /// Precision of each sample.
    pub eval_bits: u32,
    /// Midpoints that are not dyadic are rounded to this many fractional bits.
    pub point_bits: u32,
}

impl Plan {
    pub fn width(&self) -> BigRational {
        (&self.b - &self.a) / BigRational::from_integer(self.cells.into())
    }

    /// Dyadic sample point of cell `i`, inside the cell.
    pub fn point(&self, i: u64) -> Dyadic {
        let h = self.width();
        let mid = &self.a + &h * BigRational::new(BigInt::from(2 * i + 1), BigInt::from(2));
        Dyadic::try_from_rational(&mid).unwrap_or_else(|| Dyadic::from_big_rational(&mid, self.point_bits as i64))
    }
}

fn check_interval(f: &CFunc, a: &BigRational, b: &BigRational) -> Result<()> {
    if a >= b {
        return Err(Error::InvalidBracket(format!("integration interval [{a}, {b}] is empty or inverted")));
    }
    if !f.contains(a) || !f.contains(b) {
        let (lo, hi) = f.domain();
        return Err(Error::OutOfDomain { point: format!("[{a}, {b}]"), lo: lo.to_string(), hi: hi.to_string() });
    }
    Ok(())
}

fn len_shift(a: &BigRational, b: &BigRational) -> u32 {
    ceil_log2_nonneg(&(b - a))
}

/// Bits for rounding midpoints: finer than the perturbation tolerance and
/// than a quarter cell.
fn point_bits(f: &CFunc, a: &BigRational, b: &BigRational, cells: &BigInt, tol_bits: u32) -> u32 {
    let h = (b - a) / BigRational::from_integer(cells.clone());
    let cell_bits = ceil_log2(&h.recip()).max(0) as u32 + 3;
    f.modulus().at(tol_bits).max(cell_bits) + 2
}

/// Cell count of the modulus route, before any ceiling check.
pub fn modulus_cell_count(f: &CFunc, a: &BigRational, b: &BigRational, n: u32) -> BigInt {
    let s = len_shift(a, b);
    let m = f.modulus().at(n + 2 + s);
    ceil_int(&((b - a) * pow2(m as i64))).max(BigInt::one())
}

/// Cell count of the smooth route for curvature bound `d2`.
pub fn smooth_cell_count(d2: &BigRational, a: &BigRational, b: &BigRational, n: u32) -> BigInt {
    let len = b - a;
    let need = &len * &len * &len * d2 * pow2(n as i64 + 1) / BigRational::from_integer(24.into());
    let need = ceil_int(&need);
    if !need.is_positive() {
        return BigInt::one();
    }
    let mut k = need.sqrt();
    while &k * &k < need {
        k += 1;
    }
    k.max(BigInt::one())
}

pub fn modulus_plan(f: &CFunc, a: &BigRational, b: &BigRational, n: u32, meter: &WorkMeter) -> Result<Plan> {
    check_interval(f, a, b)?;
    let s = len_shift(a, b);
    let cells = modulus_cell_count(f, a, b, n);
    let k = meter.check_cells(&cells)?;
    Ok(Plan {
        a: a.clone(),
        b: b.clone(),
        cells: k,
        eval_bits: n + 2 + s,
        point_bits: point_bits(f, a, b, &cells, n + 3 + s),
    })
}

pub fn smooth_plan(f: &CFunc, a: &BigRational, b: &BigRational, n: u32, meter: &WorkMeter) -> Result<Plan> {
    check_interval(f, a, b)?;
    let d2 = f.d2_bound().ok_or_else(|| Error::MissingWitness(format!("d2_bound of {}", f.name())))?;
    let s = len_shift(a, b);
    let cells = smooth_cell_count(d2, a, b, n);
    let k = meter.check_cells(&cells)?;
    Ok(Plan {
        a: a.clone(),
        b: b.clone(),
        cells: k,
        eval_bits: n + 3 + s,
        point_bits: point_bits(f, a, b, &cells, n + 3 + s),
    })
}

/// Evaluate `f` at every midpoint of `plan`, in cell order.
pub fn sample(f: &CFunc, plan: &Plan, meter: &WorkMeter) -> Result<Vec<Dyadic>> {
    meter.add_cells(plan.cells);
    meter.add_psd_evals(plan.cells);
    meter.note_precision(plan.eval_bits as u64);
    (0..plan.cells).into_par_iter().map(|i| f.eval_unchecked(&plan.point(i), plan.eval_bits)).collect()
}

fn run(f: &CFunc, plan: &Plan, n: u32, meter: &WorkMeter) -> Result<Dyadic> {
    meter.add_cells(plan.cells);
    meter.add_psd_evals(plan.cells);
    meter.note_precision(plan.eval_bits as u64);
    let sum = (0..plan.cells)
        .into_par_iter()
        .map(|i| f.eval_unchecked(&plan.point(i), plan.eval_bits))
        .try_reduce(Dyadic::zero, |x, y| Ok(&x + &y))?;
    let total = sum.to_rational() * plan.width();
    Ok(Dyadic::from_big_rational(&total, n as i64 + 3))
}

/// Modulus-route quadrature: `|integral of f over [a, b] - result| <= 2^-n`.
pub fn integrate_modulus(f: &CFunc, a: &BigRational, b: &BigRational, n: u32, meter: &WorkMeter) -> Result<Dyadic> {
    let plan = modulus_plan(f, a, b, n, meter)?;
    run(f, &plan, n, meter)
}

/// Curvature-route quadrature: `|integral of f over [a, b] - result| <= 2^-n`.
pub fn integrate_smooth(f: &CFunc, a: &BigRational, b: &BigRational, n: u32, meter: &WorkMeter) -> Result<Dyadic> {
    let plan = smooth_plan(f, a, b, n, meter)?;
    run(f, &plan, n, meter)
}

/// Smooth route when a curvature bound is known and cheaper, modulus route otherwise.
pub fn integrate(f: &CFunc, a: &BigRational, b: &BigRational, n: u32, meter: &WorkMeter) -> Result<Dyadic> {
    integrate_with(f, a, b, n, meter, choose_route(f, a, b, n))
}

pub fn integrate_with(
    f: &CFunc,
    a: &BigRational,
    b: &BigRational,
    n: u32,
    meter: &WorkMeter,
    route: Route,
) -> Result<Dyadic> {
    if let Some(c) = f.constant_value() {
        check_interval(f, a, b)?;
        return Ok(Dyadic::from_big_rational(&(c * (b - a)), n as i64 + 1));
    }
    match route {
        Route::Modulus => integrate_modulus(f, a, b, n, meter),
        Route::Smooth => integrate_smooth(f, a, b, n, meter),
    }
}

pub fn choose_route(f: &CFunc, a: &BigRational, b: &BigRational, n: u32) -> Route {
    match f.d2_bound() {
        Some(d2) if a < b && smooth_cell_count(d2, a, b, n) <= modulus_cell_count(f, a, b, n) => Route::Smooth,
        _ => Route::Modulus,
    }
}
