//! Water-filling over a band `[0, B]` with noise spectrum `N`.
//!
//! The optimal input spectrum is `P*(f) = [L - N(f)]_+`, where the water
//! level `L` solves `Phi(L) = integral of [L - N]_+ = P`. When `L >= max N`
//! the level has the closed form `L = P/B + (1/B) integral of N` and the
//! capacity is `B ln L - integral of ln N`. Otherwise the level comes from
//! bisection on `Phi` and the capacity is `integral of [ln L - ln N]_+`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::cfunc::{self, catalog, BoundMode, CFunc, CertifyOutcome, ModulusFn};
use crate::creal::{CReal, PositiveWitness};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::rational::{ceil_log2_nonneg, pow2};
use crate::rigorint::{self, Route};
use crate::rigorlog;
use crate::work::{WorkCounts, WorkMeter};

/// Precision used to decide the clipping regime.
const REGIME_BITS: u32 = 12;

#[derive(Debug, Clone)]
pub struct ChannelSpec {
    id: String,
    bandwidth: BigRational,
    power: BigRational,
    noise: CFunc,
}

impl ChannelSpec {
    pub fn new(bandwidth: BigRational, power: BigRational, noise: CFunc) -> Result<Self> {
        if !bandwidth.is_positive() {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !power.is_positive() {
            return Err(Error::InvalidArgument(format!("power must be positive, got {power}")));
        }
        let (lo, hi) = noise.domain();
        if !lo.is_zero() || hi != &bandwidth {
            return Err(Error::InvalidArgument(format!("noise must be defined on [0, {bandwidth}], got [{lo}, {hi}]")));
        }
        if noise.pos_witness().is_none() {
            return Err(Error::MissingWitness(format!(
                "noise {} has no positivity witness; capacity with noise zeros is not computable in general",
                noise.name()
            )));
        }
        if noise.upper_bound().is_none() {
            return Err(Error::MissingWitness(format!("upper_bound of noise {}", noise.name())));
        }
        let id = format!("{}|B={bandwidth}|P={power}", noise.name());
        Ok(ChannelSpec { id, bandwidth, power, noise })
    }

    /// Channel with a catalog noise entry.
    pub fn from_catalog(name: &str, bandwidth: BigRational, power: BigRational) -> Result<Self> {
        let noise = catalog::noise(name, &bandwidth)?;
        Self::new(bandwidth, power, noise)
    }

    /// Channel with a parsed noise expression.
    pub fn from_expr(expr: &str, bandwidth: BigRational, power: BigRational) -> Result<Self> {
        let noise = CFunc::parse(expr, BigRational::zero(), bandwidth.clone())?;
        Self::new(bandwidth, power, noise)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn bandwidth(&self) -> &BigRational {
        &self.bandwidth
    }

    pub fn power(&self) -> &BigRational {
        &self.power
    }

    pub fn noise(&self) -> &CFunc {
        &self.noise
    }

    pub fn witness(&self) -> &BigRational {
        self.noise.pos_witness().expect("checked at construction")
    }

    pub fn with_power(&self, power: BigRational) -> Result<Self> {
        Self::new(self.bandwidth.clone(), power, self.noise.clone())
    }

    pub fn with_noise(&self, noise: CFunc) -> Result<Self> {
        Self::new(self.bandwidth.clone(), self.power.clone(), noise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    NoClipCertified,
    Clipped,
    Unresolved,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::NoClipCertified => "NO_CLIP_CERTIFIED",
            Regime::Clipped => "CLIPPED",
            Regime::Unresolved => "UNRESOLVED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelMethod {
    ClosedForm,
    Bisection,
}

#[derive(Debug, Clone)]
pub struct WaterLevel {
    pub level: CReal,
    pub regime: Regime,
    pub avg_noise: CReal,
    pub method: LevelMethod,
    /// Certified `|L - level|` (zero for the closed form, whose value is exact).
    pub uncertainty: BigRational,
    /// Certified bracket of the true level from bisection.
    pub bracket: Option<(BigRational, BigRational)>,
    /// Bracket width after each bisection step.
    pub widths: Vec<BigRational>,
}

impl WaterLevel {
    /// Whether `level` is the true water level (up to `uncertainty`).
    pub fn is_valid(&self) -> bool {
        self.method == LevelMethod::Bisection || self.regime == Regime::NoClipCertified
    }
}

/// Knobs for testing and profiling particular algorithm paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Force a quadrature route instead of picking the cheaper one.
    pub route: Option<Route>,
    /// Skip the constant-noise and no-clip shortcuts.
    pub force_general: bool,
}

fn integrate_opt(f: &CFunc, a: &BigRational, b: &BigRational, n: u32, meter: &WorkMeter, opts: Options) -> Result<Dyadic> {
    match opts.route {
        Some(r) => rigorint::integrate_with(f, a, b, n, meter, r),
        None => rigorint::integrate(f, a, b, n, meter),
    }
}

fn integral_creal(spec: &ChannelSpec, meter: &WorkMeter, opts: Options) -> CReal {
    let noise = spec.noise.clone();
    let b = spec.bandwidth.clone();
    let meter = meter.clone();
    CReal::from_process(move |n| integrate_opt(&noise, &BigRational::zero(), &b, n, &meter, opts))
}

fn closed_parts(spec: &ChannelSpec, meter: &WorkMeter, opts: Options) -> (CReal, CReal) {
    let integral = integral_creal(spec, meter, opts);
    let avg = integral.div_rational(&spec.bandwidth).expect("positive bandwidth");
    let level = avg.add(&CReal::from_rational(&spec.power / &spec.bandwidth));
    (level, avg)
}

/// Regime of a level known to lie in `[lo, hi]`.
fn classify(noise: &CFunc, lo: &BigRational, hi: &BigRational) -> Result<Regime> {
    if noise.upper_bound().is_some_and(|u| u <= lo) {
        return Ok(Regime::NoClipCertified);
    }
    if cfunc::certify_bounds(noise, BoundMode::MaxBelow, lo, REGIME_BITS)? == CertifyOutcome::Certified {
        return Ok(Regime::NoClipCertified);
    }
    if cfunc::certify_bounds(noise, BoundMode::MaxBelow, hi, REGIME_BITS)? == CertifyOutcome::Refuted {
        return Ok(Regime::Clipped);
    }
    Ok(Regime::Unresolved)
}

fn enclosure(x: &CReal, n: u32) -> Result<(BigRational, BigRational)> {
    let v = x.query(n)?.to_rational();
    let e = pow2(-(n as i64));
    Ok((&v - &e, &v + &e))
}

/// Closed-form level `P/B + (1/B) integral of N`, with its regime.
pub fn water_level_closed(spec: &ChannelSpec, meter: &WorkMeter) -> Result<WaterLevel> {
    water_level_closed_with(spec, meter, Options::default())
}

pub fn water_level_closed_with(spec: &ChannelSpec, meter: &WorkMeter, opts: Options) -> Result<WaterLevel> {
    let (level, avg_noise) = closed_parts(spec, meter, opts);
    // coarse enclosures first; most channels separate at a few bits
    let mut regime = Regime::Unresolved;
    for bits in [6, 12, REGIME_BITS + 8] {
        let (lo, hi) = enclosure(&level, bits)?;
        regime = classify(&spec.noise, &lo, &hi)?;
        if regime != Regime::Unresolved {
            break;
        }
    }
    Ok(WaterLevel {
        level,
        regime,
        avg_noise,
        method: LevelMethod::ClosedForm,
        uncertainty: BigRational::zero(),
        bracket: None,
        widths: Vec::new(),
    })
}

/// Midpoint samples of `N`, sorted, with prefix sums: `Phi_hat(L) = h * sum [L - v_i]_+`
/// is within `2^-(n+1)` of `Phi(L)` for every `L`.
struct PhiHat {
    h: BigRational,
    sorted: Vec<Dyadic>,
    prefix: Vec<Dyadic>,
}

impl PhiHat {
    fn build(spec: &ChannelSpec, n: u32, meter: &WorkMeter) -> Result<Self> {
        let zero = BigRational::zero();
        let plan = rigorint::modulus_plan(&spec.noise, &zero, &spec.bandwidth, n + 1, meter)?;
        let mut sorted = rigorint::sample(&spec.noise, &plan, meter)?;
        sorted.sort();
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        let mut acc = Dyadic::zero();
        prefix.push(acc.clone());
        for v in &sorted {
            acc = &acc + v;
            prefix.push(acc.clone());
        }
        Ok(PhiHat { h: plan.width(), sorted, prefix })
    }

    fn at(&self, level: &Dyadic) -> BigRational {
        let j = self.sorted.partition_point(|v| v < level);
        let s = &(level * &Dyadic::from_int(j as i64)) - &self.prefix[j];
        s.to_rational() * &self.h
    }
}

/// Water level by bisection on `Phi`, with `|Phi(level) - P| <= 2^-n`.
pub fn water_level_general(spec: &ChannelSpec, n: u32, meter: &WorkMeter) -> Result<WaterLevel> {
    water_level_general_with(spec, n, meter, Options::default())
}

pub fn water_level_general_with(spec: &ChannelSpec, n: u32, meter: &WorkMeter, opts: Options) -> Result<WaterLevel> {
    let phi = PhiHat::build(spec, n, meter)?;
    let p = &spec.power;
    let tol = pow2(-(n as i64) - 1);
    let (closed, avg_noise) = closed_parts(spec, meter, opts);

    let k = n as i64 + 4;
    let c = spec.witness();
    let mut lo = Dyadic::floor_ratio(c.numer(), c.denom(), k)?.round_to(k) - Dyadic::pow2(-(n as i64) - 1);
    // Phi(L_closed) >= P, and the sampled estimate is within tol of Phi
    let above = closed.query(n + 4)?.to_rational() + pow2(-(n as i64) - 4) + &tol / &spec.bandwidth;
    let mut hi = Dyadic::ceil_ratio(above.numer(), above.denom(), k)?;
    if phi.at(&hi) < *p {
        return Err(Error::InvalidBracket("sampled power at the closed-form level is below P".into()));
    }

    let mut widths = Vec::new();
    let max_iters = 4 * n as usize + 256;
    let level = loop {
        let mid = (&lo + &hi).mul_pow2(-1);
        meter.add_bisection_iter();
        let v = phi.at(&mid);
        if (&v - p).abs() <= tol || widths.len() > max_iters {
            break mid;
        }
        if &v < p {
            lo = mid;
        } else {
            hi = mid;
        }
        widths.push((&hi - &lo).to_rational());
    };

    // shrink the certified bracket around the chosen level
    let (mut a, mut b) = (lo.clone(), level.clone());
    for _ in 0..(2 * n + 16) {
        let m = (&a + &b).mul_pow2(-1);
        if phi.at(&m) < p - &tol {
            a = m;
        } else {
            b = m;
        }
    }
    lo = a;
    let (mut a, mut b) = (level.clone(), hi.clone());
    for _ in 0..(2 * n + 16) {
        let m = (&a + &b).mul_pow2(-1);
        if phi.at(&m) > p + &tol {
            b = m;
        } else {
            a = m;
        }
    }
    hi = b;

    let (lo_q, hi_q) = (lo.to_rational(), hi.to_rational());
    let lq = level.to_rational();
    let uncertainty = crate::rational::max(&(&lq - &lo_q), &(&hi_q - &lq));
    let regime = classify(&spec.noise, &lo_q, &hi_q)?;
    Ok(WaterLevel {
        level: CReal::from_dyadic(level),
        regime,
        avg_noise,
        method: LevelMethod::Bisection,
        uncertainty,
        bracket: Some((lo_q, hi_q)),
        widths,
    })
}

/// `P*(f)` with its evaluation error and the level uncertainty carried along.
#[derive(Debug, Clone)]
pub struct PsdValue {
    pub value: Dyadic,
    pub eval_error: Dyadic,
    pub level_uncertainty: BigRational,
}

impl PsdValue {
    pub fn error_bound(&self) -> BigRational {
        self.eval_error.to_rational() + &self.level_uncertainty
    }

    pub fn enclosure(&self) -> (BigRational, BigRational) {
        let v = self.value.to_rational();
        let e = self.error_bound();
        (&v - &e, &v + &e)
    }
}

pub fn psd_at(spec: &ChannelSpec, wl: &WaterLevel, f: &Dyadic, n: u32) -> Result<PsdValue> {
    let fq = f.to_rational();
    if fq.is_negative() || fq > spec.bandwidth {
        return Err(Error::OutOfDomain { point: f.to_string(), lo: "0".into(), hi: spec.bandwidth.to_string() });
    }
    if !wl.is_valid() {
        return Err(Error::InvalidArgument(format!(
            "closed-form level is not the water level in regime {}",
            wl.regime
        )));
    }
    let v = &wl.level.query(n + 1)? - &spec.noise.eval(f, n + 1)?;
    let value = if v.is_negative() { Dyadic::zero() } else { v };
    Ok(PsdValue { value, eval_error: Dyadic::pow2(-(n as i64)), level_uncertainty: wl.uncertainty.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityPath {
    ConstantNoise,
    NoClip,
    General,
}

impl fmt::Display for CapacityPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CapacityPath::ConstantNoise => "constant-noise",
            CapacityPath::NoClip => "no-clip",
            CapacityPath::General => "general",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub value: Dyadic,
    /// `|C - value| <= 2^-precision_bits`.
    pub precision_bits: u32,
    pub regime: Regime,
    pub path: CapacityPath,
    /// Approximate water level, for display.
    pub level: Dyadic,
    pub work: WorkCounts,
}

impl CapacityResult {
    pub fn error_bound(&self) -> Dyadic {
        Dyadic::pow2(-(self.precision_bits as i64))
    }
}

/// Capacity in nats within `2^-m`.
pub fn capacity(spec: &ChannelSpec, m: u32, meter: &WorkMeter) -> Result<CapacityResult> {
    capacity_with(spec, m, meter, Options::default())
}

pub fn capacity_with(spec: &ChannelSpec, m: u32, meter: &WorkMeter, opts: Options) -> Result<CapacityResult> {
    let before = meter.counts();
    let (value, regime, path, level) = capacity_inner(spec, m, meter, opts)?;
    let after = meter.counts();
    let work = WorkCounts {
        psd_evals: after.psd_evals - before.psd_evals,
        quadrature_cells: after.quadrature_cells - before.quadrature_cells,
        max_precision_requested: after.max_precision_requested,
        bisection_iters: after.bisection_iters - before.bisection_iters,
    };
    Ok(CapacityResult { value, precision_bits: m, regime, path, level, work })
}

fn capacity_inner(spec: &ChannelSpec, m: u32, meter: &WorkMeter, opts: Options) -> Result<(Dyadic, Regime, CapacityPath, Dyadic)> {
    let b = &spec.bandwidth;
    let sb = ceil_log2_nonneg(b);
    let witness = PositiveWitness::new(spec.witness().clone())?;

    if let (Some(c), false) = (spec.noise.constant_value(), opts.force_general) {
        // B ln(1 + P / (B c))
        let level = &spec.power / b + c;
        let l = CReal::from_rational(level.clone()).ln(&witness).query(m + 1 + sb)?;
        let ln_c = CReal::from_rational(c.clone()).ln(&witness).query(m + 2 + sb)?;
        let v = (&l - &ln_c).to_rational() * b;
        let value = Dyadic::from_big_rational(&v, m as i64 + 3);
        return Ok((value, Regime::NoClipCertified, CapacityPath::ConstantNoise, Dyadic::from_big_rational(&level, 64)));
    }

    let wl = water_level_closed_with(spec, meter, opts)?;
    if wl.regime == Regime::NoClipCertified && !opts.force_general {
        // B ln L - integral of ln N with 2^-(M+2) each to L, B ln L and the integral;
        // ln is 2/c-Lipschitz above c/2, so L within c 2^-(M+3+s_B) suffices
        let ln_noise = spec.noise.ln_compose()?;
        let int_ln = integrate_opt(&ln_noise, &BigRational::zero(), b, m + 2, meter, opts)?;
        let k = m + 3 + sb + ceil_log2_nonneg(&spec.witness().recip());
        let level = wl.level.query(k)?;
        let level_witness = PositiveWitness::new(level.to_rational())?;
        let ln_level = CReal::from_dyadic(level.clone()).ln(&level_witness).query(m + 2 + sb)?;
        let v = ln_level.to_rational() * b - int_ln.to_rational();
        let value = Dyadic::from_big_rational(&v, m as i64 + 3);
        return Ok((value, wl.regime, CapacityPath::NoClip, level));
    }

    // dC/dPhi = 1/L <= 1/c, so a level with |Phi - P| <= c 2^-(M+3) costs at most 2^-(M+2)
    let c = spec.witness();
    let n_level = m + 3 + ceil_log2_nonneg(&c.recip());
    let wl = water_level_general_with(spec, n_level, meter, opts)?;
    let level = wl.level.query(0)?;
    let integrand = clipped_log_gap(&spec.noise, &level)?;
    let route = opts.route.unwrap_or(Route::Modulus);
    let route = if route == Route::Smooth { Route::Modulus } else { route };
    let value = rigorint::integrate_with(&integrand, &BigRational::zero(), b, m + 2, meter, route)?;
    Ok((value, wl.regime, CapacityPath::General, level))
}

/// `x -> [ln L - ln N(x)]_+` for an exact dyadic level `L`.
fn clipped_log_gap(noise: &CFunc, level: &Dyadic) -> Result<CFunc> {
    let ln_noise = noise.ln_compose()?;
    let ln_level = CReal::from_dyadic(level.clone()).ln(&PositiveWitness::new(level.to_rational())?);
    let clipped = ln_noise.pos_part_of_level_minus(&ln_level);
    let modulus: ModulusFn = clipped.modulus().clone();
    let (lo, hi) = (clipped.domain().0.clone(), clipped.domain().1.clone());
    let level = level.clone();
    let inner_noise = noise.clone();
    let eval = move |x: &Dyadic, n: u32| -> Result<Dyadic> {
        // where N(x) >= L the integrand vanishes exactly
        let coarse = inner_noise.eval(x, 24)?;
        if &coarse - &Dyadic::pow2(-24) >= level {
            return Ok(Dyadic::zero());
        }
        clipped.eval(x, n)
    };
    let out = CFunc::from_parts(format!("[ln L - ln {}]+", noise.name()), lo, hi, eval, modulus)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DiscretizationResult {
    pub n_sub: u64,
    pub delta_f: BigRational,
    /// `c_n` within `2^-precision_bits`.
    pub c_n: Dyadic,
    pub precision_bits: u32,
    /// Discrete water level of the sampled problem.
    pub level: BigRational,
    /// Allocation per subchannel; `sum delta_f * p_i = P` exactly.
    pub sub_levels: Vec<BigRational>,
}

/// Capacity of `n_sub` parallel subchannels sampled at band midpoints,
/// `c_n = sum delta_f ln(1 + p_i / N(f_i))`, within `2^-n`.
pub fn discretized_capacity(spec: &ChannelSpec, n_sub: u64, n: u32, meter: &WorkMeter) -> Result<DiscretizationResult> {
    if n_sub == 0 {
        return Err(Error::InvalidArgument("need at least one subchannel".into()));
    }
    let b = &spec.bandwidth;
    let c = spec.witness();
    let delta = b / BigRational::from_integer(n_sub.into());
    // |d c_n / d nu_i| <= delta / nu_i, so samples within 2^-k cost at most B 2^-k / (c/2)
    let k = n + 3 + ceil_log2_nonneg(&(b / c));
    let noise = &spec.noise;
    let m = noise.modulus().at(k + 1) as i64 + 1;
    meter.add_psd_evals(n_sub);
    meter.note_precision(k as u64 + 1);
    let samples: Vec<Dyadic> = (0..n_sub)
        .map(|i| {
            let f = &delta * BigRational::new(BigInt::from(2 * i + 1), BigInt::from(2));
            let x = Dyadic::try_from_rational(&f).unwrap_or_else(|| Dyadic::from_big_rational(&f, m));
            noise.eval_unchecked(&x, k + 1)
        })
        .collect::<Result<_>>()?;

    let nu: Vec<BigRational> = samples.iter().map(Dyadic::to_rational).collect();
    let mut order: Vec<usize> = (0..nu.len()).collect();
    order.sort_by(|&i, &j| nu[i].cmp(&nu[j]));
    let budget = &spec.power / &delta;
    let mut sum = BigRational::zero();
    let mut level = BigRational::zero();
    for (j, &i) in order.iter().enumerate() {
        let cand = (&budget + &sum + &nu[i]) / BigRational::from_integer((j as i64 + 1).into());
        if j > 0 && nu[i] >= level {
            break;
        }
        sum += &nu[i];
        level = cand;
    }

    let sub_levels: Vec<BigRational> = nu
        .iter()
        .map(|v| if *v < level { &level - v } else { BigRational::zero() })
        .collect();
    let ln_bits = n + 3 + ceil_log2_nonneg(b);
    let mut total = BigRational::zero();
    for (v, p) in nu.iter().zip(&sub_levels) {
        if p.is_positive() {
            total += rigorlog::ln_rational(&(&level / v), ln_bits).to_rational();
        }
    }
    let c_n = Dyadic::from_big_rational(&(total * &delta), n as i64 + 3);
    Ok(DiscretizationResult { n_sub, delta_f: delta, c_n, precision_bits: n, level, sub_levels })
}

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n_sub: u64,
    pub c_n: Dyadic,
    /// `|c_n - C|` estimate, and a certified enclosure of it.
    pub error: f64,
    pub error_lo: BigRational,
    pub error_hi: BigRational,
    pub precision_bits: u32,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub reference: Dyadic,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `-log2 |c_n - C|` against `log2 n_sub`.
    pub order: Option<f64>,
}

impl ConvergenceTable {
    /// Every row's error is certified to be below the previous row's.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error_hi < w[0].error_lo)
    }
}

/// Errors of `c_n` against `capacity(spec, M + 4)`.
pub fn convergence_study(spec: &ChannelSpec, n_sub_list: &[u64], m: u32, meter: &WorkMeter) -> Result<ConvergenceTable> {
    let cap = capacity(spec, m + 4, meter)?;
    let mut rows = Vec::with_capacity(n_sub_list.len());
    for &n_sub in n_sub_list {
        let d = discretized_capacity(spec, n_sub, m + 4, meter)?;
        rows.push(row(n_sub, d.c_n, &cap.value, m + 4));
    }
    Ok(finish(cap.value, rows))
}

/// Like [`convergence_study`], against a caller-supplied reference value and
/// with per-row precision raised (from `start_bits`, doubling, up to
/// `max_bits`) until each error is resolved to within a factor of about 1.3.
pub fn convergence_study_against(
    spec: &ChannelSpec,
    n_sub_list: &[u64],
    reference: &CReal,
    start_bits: u32,
    max_bits: u32,
    meter: &WorkMeter,
) -> Result<ConvergenceTable> {
    let mut rows = Vec::with_capacity(n_sub_list.len());
    for &n_sub in n_sub_list {
        let mut p = start_bits;
        loop {
            let d = discretized_capacity(spec, n_sub, p, meter)?;
            let r = reference.query(p)?;
            let diff = (&d.c_n - &r).abs();
            if diff >= Dyadic::pow2(3 - p as i64) || p >= max_bits {
                rows.push(row(n_sub, d.c_n, &r, p));
                break;
            }
            p = (2 * p).min(max_bits);
        }
    }
    Ok(finish(reference.query(start_bits)?, rows))
}

fn row(n_sub: u64, c_n: Dyadic, reference: &Dyadic, p: u32) -> ConvergenceRow {
    let diff = (&c_n - reference).abs();
    let slack = pow2(1 - p as i64);
    let d = diff.to_rational();
    let lo = if d > slack { &d - &slack } else { BigRational::zero() };
    ConvergenceRow { n_sub, error: diff.to_f64(), c_n, error_lo: lo, error_hi: d + slack, precision_bits: p }
}

fn finish(reference: Dyadic, rows: Vec<ConvergenceRow>) -> ConvergenceTable {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| ((r.n_sub as f64).log2(), -dyadic_log2(&r.error_hi, r.error)))
        .collect();
    let order = least_squares_slope(&pts);
    ConvergenceTable { reference, rows, order }
}

/// `log2` of a tiny positive error, going through the exact value when `f64` would underflow.
fn dyadic_log2(exact_hi: &BigRational, approx: f64) -> f64 {
    if approx > 1e-300 {
        return approx.log2();
    }
    let num = exact_hi.numer().bits() as f64;
    let den = exact_hi.denom().bits() as f64;
    let mant = exact_hi.to_f64().filter(|v| *v > 0.0).map(f64::log2);
    mant.unwrap_or(num - den)
}

/// Slope of the least-squares line through `pts`, if defined.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
