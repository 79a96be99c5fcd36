//! Acceptance criteria 1-10, run in sequence so timings are not skewed by
//! concurrent tests. Prints one PASS/FAIL line per criterion.

mod common;

use std::time::Instant;

use capcert_core::cfunc::catalog;
use capcert_core::profiler::{self, Counter, Format, SweepOptions, Target, DISCLAIMER};
use capcert_core::rigorint::Route;
use capcert_core::rigorlog::{self, make_log_window};
use capcert_core::waterfill::{self, CapacityPath, Options};
use capcert_core::{CFunc, CReal, ChannelSpec, Dyadic, PositiveWitness, WorkMeter};
use common::constants::*;
use common::{dec, pow2, q, ref_ln, rng};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

type Check = Result<String, String>;

fn int(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dist(v: &Dyadic, truth: &BigRational) -> BigRational {
    (v.to_rational() - truth).abs()
}

fn bits_of(d: &BigRational) -> f64 {
    if d.is_zero() {
        return f64::NEG_INFINITY;
    }
    d.to_f64().map(f64::log2).filter(|v| v.is_finite()).unwrap_or(-2000.0)
}

fn criterion_1() -> Check {
    let spec = ChannelSpec::from_expr("1", int(1), int(3)).map_err(|e| e.to_string())?;
    let truth = dec(C_FLAT);
    let mut worst = 0f64;
    for m in [8u32, 16, 24, 40] {
        let t = Instant::now();
        let c = waterfill::capacity(&spec, m, &WorkMeter::default()).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let d = dist(&c.value, &truth);
        ensure(d <= pow2(-(m as i64)), || format!("M={m}: error 2^{:.2}", bits_of(&d)))?;
        ensure(secs < 1.0, || format!("M={m}: took {secs:.3}s"))?;
        worst = worst.max(secs);
    }
    Ok(format!("ln 4 within 2^-M for M in {{8,16,24,40}}, slowest {worst:.3}s"))
}

fn criterion_2() -> Check {
    let spec = ChannelSpec::from_catalog("affine", int(1), int(2)).map_err(|e| e.to_string())?;
    let truth = dec(C_AFFINE);
    let mut notes = Vec::new();
    for m in [8u32, 12, 16, 20] {
        let t = Instant::now();
        let c = waterfill::capacity(&spec, m, &WorkMeter::default()).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let d = dist(&c.value, &truth);
        ensure(d <= pow2(-(m as i64)), || format!("default route M={m}: error 2^{:.2}", bits_of(&d)))?;
        ensure(c.path == CapacityPath::NoClip, || format!("M={m}: path {}", c.path))?;
        if m == 20 {
            ensure(secs < 10.0, || format!("smooth route M=20 took {secs:.2}s"))?;
            notes.push(format!("smooth M=20 {secs:.2}s"));
        }
    }
    let opts = Options { route: Some(Route::Modulus), force_general: false };
    for m in [8u32, 12, 16] {
        let t = Instant::now();
        let c = waterfill::capacity_with(&spec, m, &WorkMeter::default(), opts).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let d = dist(&c.value, &truth);
        ensure(d <= pow2(-(m as i64)), || format!("modulus route M={m}: error 2^{:.2}", bits_of(&d)))?;
        ensure(secs < 120.0, || format!("modulus route M={m} took {secs:.1}s"))?;
        if m == 16 {
            notes.push(format!("modulus M=16 {secs:.1}s"));
        }
    }
    Ok(format!("within 2^-M for M in {{8,12,16,20}}; {}", notes.join(", ")))
}

fn criterion_3() -> Check {
    let spec = ChannelSpec::from_catalog("affine", int(1), q(1, 10)).map_err(|e| e.to_string())?;
    let meter = WorkMeter::default();
    let wl = waterfill::water_level_general(&spec, 16, &meter).map_err(|e| e.to_string())?;
    let level = wl.level.query(40).map_err(|e| e.to_string())?;
    let d = dist(&level, &dec(L_CLIPPED));
    ensure(d <= pow2(-14), || format!("level error 2^{:.2}", bits_of(&d)))?;
    let at1 = waterfill::psd_at(&spec, &wl, &Dyadic::one(), 16).map_err(|e| e.to_string())?;
    let (lo, hi) = at1.enclosure();
    ensure(!lo.is_positive() && !hi.is_negative(), || format!("psd_at(1) enclosure [{lo}, {hi}] misses 0"))?;
    let at0 = waterfill::psd_at(&spec, &wl, &Dyadic::zero(), 16).map_err(|e| e.to_string())?;
    let d0 = dist(&at0.value, &dec(SQRT_FIFTH));
    ensure(d0 <= pow2(-12), || format!("psd_at(0) error 2^{:.2}", bits_of(&d0)))?;
    Ok(format!("level error 2^{:.1}, psd_at(0) error 2^{:.1}, psd_at(1) enclosure contains 0", bits_of(&d), bits_of(&d0)))
}

fn criterion_4() -> Check {
    let names: Vec<String> = catalog::names().into_iter().filter(|n| n != "stress-4").take(10).collect();
    ensure(names.len() == 10, || "catalog has fewer than 10 entries".into())?;
    let power = q(1, 4);
    let mut worst = f64::NEG_INFINITY;
    for name in &names {
        let spec = ChannelSpec::from_catalog(name, int(1), power.clone()).map_err(|e| e.to_string())?;
        let noise = common::noise_f64(name);
        for m in [8u32, 12] {
            let wl = waterfill::water_level_general(&spec, m, &WorkMeter::default()).map_err(|e| e.to_string())?;
            let l = wl.level.query(60).map_err(|e| e.to_string())?.to_f64();
            let phi = common::riemann(|f| (l - noise(f)).max(0.0), 1.0, 1 << 18);
            let err = (phi - 0.25).abs();
            ensure(err <= 2f64.powi(1 - m as i32), || format!("{name} M={m}: |Phi - P| = {err:.3e}"))?;
            worst = worst.max((err * 2f64.powi(m as i32)).log2());
        }
    }
    Ok(format!("10 specs x M in {{8,12}}, worst |Phi - P| = 2^(-M{:+.2})", worst))
}

fn criterion_5() -> Check {
    let w = make_log_window(&int(1), &int(3)).map_err(|e| e.to_string())?;
    let budget = 40u32;
    let mut r = rng(5);
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..1000 {
        let k: i64 = r.gen_range(1..(1i64 << 21));
        let x = Dyadic::new(BigInt::from(k + (1i64 << 20)), -20);
        let truth = ref_ln(&x.to_rational(), budget + 20);
        for m in 2u32..=8 {
            let v = rigorlog::taylor_log_poly(&w, m, &x, budget).map_err(|e| e.to_string())?;
            let bound = w.gamma() * pow2(-(m as i64)) + pow2(-(budget as i64)) - pow2(-(budget as i64) - 20);
            checked += 1;
            if dist(&v, &truth) > bound {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, || format!("{violations} of {checked} Taylor bounds violated"))?;
    Ok(format!("{checked} checks, 0 violations"))
}

fn criterion_6() -> Check {
    let w = make_log_window(&int(1), &int(3)).map_err(|e| e.to_string())?;
    let lam = w.lipschitz().clone();
    let budget = 40u32;
    let mut r = rng(6);
    let mut violations = 0;
    for _ in 0..1000 {
        let m: u32 = r.gen_range(2..=8);
        let a = Dyadic::new(BigInt::from(r.gen_range(1..(1i64 << 21)) + (1i64 << 20)), -20);
        let b = Dyadic::new(BigInt::from(r.gen_range(1..(1i64 << 21)) + (1i64 << 20)), -20);
        let qa = rigorlog::taylor_log_poly(&w, m, &a, budget).map_err(|e| e.to_string())?;
        let qb = rigorlog::taylor_log_poly(&w, m, &b, budget).map_err(|e| e.to_string())?;
        let lhs = (&qa - &qb).abs().to_rational();
        let rhs = &lam * (&a - &b).abs().to_rational() + pow2(1 - budget as i64);
        if lhs > rhs {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} of 1000 Lipschitz bounds violated"))?;
    Ok(format!("1000 pairs, Lambda = {lam}, 0 violations"))
}

/// Dyadic within `2^-k` of `g`, pushed toward the edge of the allowed error.
fn adversarial(g: &BigRational, k: u32, r: &mut impl Rng) -> Dyadic {
    let grid = k as i64 + 8;
    let e = pow2(-(k as i64));
    let target = match r.gen_range(0..3) {
        0 => g - &e,
        1 => g + &e,
        _ => g + &e * q(r.gen_range(-255..=255), 256),
    };
    let scaled = &target * pow2(grid);
    let n = if &target < g { scaled.ceil() } else { scaled.floor() }.to_integer();
    Dyadic::new(n, -grid)
}

fn criterion_7() -> Check {
    let windows = [(q(1, 1), q(3, 1)), (q(3, 4), q(9, 4)), (q(1, 8), q(5, 1)), (q(2, 1), q(10, 1))];
    let mut r = rng(7);
    let mut violations = 0;
    let mut trials = 0;
    for m in [4u32, 8, 16, 24] {
        for _ in 0..200 {
            let (lo, hi) = &windows[r.gen_range(0..windows.len())];
            let w = make_log_window(lo, hi).map_err(|e| e.to_string())?;
            let margin = (hi - lo) / int(16);
            let t = q(r.gen_range(0..(3 << 20)), 3 << 20);
            let g = lo + &margin + (hi - lo - &margin * int(2)) * t;
            let mut asked = 0;
            let out = rigorlog::log_compose(
                |_, k| {
                    asked = k;
                    Ok(adversarial(&g, k, &mut r))
                },
                &w,
                &Dyadic::zero(),
                m,
            )
            .map_err(|e| e.to_string())?;
            trials += 1;
            let truth = ref_ln(&g, m + 30);
            if asked != w.padded_precision(m) || dist(&out, &truth) > pow2(-(m as i64)) - pow2(-(m as i64) - 30) {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, || format!("{violations} of {trials} trials violated 2^-M"))?;
    Ok(format!("{trials} trials over M in {{4,8,16,24}}, 0 violations"))
}

fn criterion_8() -> Check {
    let list: Vec<u64> = (1..=8).map(|k| 1u64 << k).collect();
    let mut notes = Vec::new();
    for (name, reference) in [("affine", C_AFFINE), ("sine", C_SINE)] {
        let spec = ChannelSpec::from_catalog(name, int(1), int(2)).map_err(|e| e.to_string())?;
        let cref = common::creal_from_decimal(reference);
        let t = Instant::now();
        let table = waterfill::convergence_study_against(&spec, &list, &cref, 64, 560, &WorkMeter::default())
            .map_err(|e| e.to_string())?;
        let order = table.order.unwrap_or(f64::NAN);
        ensure(table.strictly_decreasing(), || {
            let rows: Vec<String> = table.rows.iter().map(|r| format!("{}:{:.3e}", r.n_sub, r.error)).collect();
            format!("{name}: errors not certified strictly decreasing: {}", rows.join(" "))
        })?;
        ensure(order >= 1.8, || format!("{name}: fitted order {order:.3}"))?;
        let last = table.rows.last().unwrap();
        notes.push(format!(
            "{name} order {order:.2} (error at n=256 about 2^{:.1}, {:.1}s)",
            bits_of(&last.error_hi),
            t.elapsed().as_secs_f64()
        ));
    }
    Ok(notes.join("; "))
}

fn criterion_9() -> Check {
    let spec = ChannelSpec::from_catalog("affine", int(1), int(2)).map_err(|e| e.to_string())?;
    let opts = SweepOptions { paths: Options { route: Some(Route::Modulus), force_general: false }, ..Default::default() };
    let reports = profiler::sweep_precision_with(&spec, &[6, 8, 10, 12], &Target::Capacity, opts).map_err(|e| e.to_string())?;
    let slope = profiler::fit_growth(&reports, Counter::QuadratureCells).map_err(|e| e.to_string())?;
    let text = profiler::emit_report(&reports, Format::Text).map_err(|e| e.to_string())?;
    ensure(text.contains(DISCLAIMER), || "report lacks the disclaimer".into())?;
    ensure((0.9..=1.1).contains(&slope), || format!("slope {slope:.3}"))?;
    Ok(format!("quadrature_cells slope {slope:.3} per bit over M in {{6,8,10,12}}; disclaimer present"))
}

fn round_nearest_away(x: &BigRational, m: u32) -> BigRational {
    let s = x * pow2(m as i64);
    let r = s.abs() + q(1, 2);
    let n = r.floor().to_integer();
    let n = if s.is_negative() { -n } else { n };
    BigRational::new(n, BigInt::from(1) << m as usize)
}

fn criterion_10() -> Check {
    let mut r = rng(10);
    let random_dyadic = |r: &mut rand_chacha::ChaCha8Rng| {
        let mant: i128 = r.gen_range(-(1i128 << 80)..(1i128 << 80));
        Dyadic::new(BigInt::from(mant), r.gen_range(-90..40))
    };
    let mut bad = 0;
    for _ in 0..10_000 {
        let a = random_dyadic(&mut r);
        let b = random_dyadic(&mut r);
        let (qa, qb) = (a.to_rational(), b.to_rational());
        let m: u32 = r.gen_range(0..100);
        let ok = (&a + &b).to_rational() == &qa + &qb
            && (&a - &b).to_rational() == &qa - &qb
            && (&a * &b).to_rational() == &qa * &qb
            && (-&a).to_rational() == -qa.clone()
            && a.cmp(&b) == qa.cmp(&qb)
            && a.round(m).to_rational() == round_nearest_away(&qa, m);
        if !ok {
            bad += 1;
        }
    }
    ensure(bad == 0, || format!("dyadic: {bad} of 10000 cases disagree with exact fractions"))?;

    let mut bad_real = 0;
    for _ in 0..1000 {
        let a = q(r.gen_range(-1000..1000), r.gen_range(1..97));
        let b = q(r.gen_range(-1000..1000), r.gen_range(1..97));
        let c = q(r.gen_range(1..1000), r.gen_range(1..97));
        let x = CReal::from_rational(a.clone())
            .add(&CReal::from_rational(b.clone()))
            .mul(&CReal::from_rational(c.clone()))
            .sub(&CReal::from_rational(a.clone()).mul_rational(&q(1, 3)));
        let exact = (&a + &b) * &c - &a * q(1, 3);
        let lnx = CReal::from_rational(c.clone()).ln(&PositiveWitness::new(c.clone()).map_err(|e| e.to_string())?);
        let n1: u32 = r.gen_range(0..80);
        let n2: u32 = r.gen_range(0..80);
        let (x1, x2) = (x.query(n1).map_err(|e| e.to_string())?, x.query(n2).map_err(|e| e.to_string())?);
        let l1 = lnx.query(n1).map_err(|e| e.to_string())?;
        let ok = dist(&x1, &exact) <= pow2(-(n1 as i64))
            && dist(&x2, &exact) <= pow2(-(n2 as i64))
            && dist(&x1, &x2.to_rational()) <= pow2(-(n1 as i64)) + pow2(-(n2 as i64))
            && dist(&l1, &ref_ln(&c, n1 + 20)) <= pow2(-(n1 as i64)) - pow2(-(n1 as i64) - 20);
        if !ok {
            bad_real += 1;
        }
    }
    ensure(bad_real == 0, || format!("creal: {bad_real} of 1000 cases inconsistent"))?;

    let mut bad_mod = 0;
    let mut pairs = 0;
    for name in catalog::names() {
        let f: CFunc = catalog::noise(&name, &int(1)).map_err(|e| e.to_string())?;
        let reference = common::noise_f64(&name);
        for _ in 0..200 {
            let n: u32 = r.gen_range(2..24);
            let m = f.modulus().at(n) as i64;
            let x = Dyadic::new(BigInt::from(r.gen_range(0..(1i64 << 30))), -30);
            let step = Dyadic::new(BigInt::from(r.gen_range(-(1i64 << 20)..=(1i64 << 20))), -20 - m);
            let y = &x + &step;
            let yq = y.to_rational();
            if yq.is_negative() || yq > int(1) {
                continue;
            }
            pairs += 1;
            let fx = f.eval(&x, n + 8).map_err(|e| e.to_string())?;
            let fy = f.eval(&y, n + 8).map_err(|e| e.to_string())?;
            let tol = 2f64.powi(-(n as i32));
            let exact_gap = (reference(x.to_f64()) - reference(y.to_f64())).abs();
            if exact_gap > tol + 1e-12 || dist(&fx, &fy.to_rational()) > pow2(-(n as i64)) + pow2(-(n as i64) - 7) {
                bad_mod += 1;
            }
        }
    }
    ensure(bad_mod == 0, || format!("modulus: {bad_mod} of {pairs} pairs violated"))?;
    Ok(format!("10000 dyadic cases, 1000 computable-real cases, {pairs} modulus pairs over the catalog, 0 violations"))
}

#[test]
fn acceptance_criteria() {
    let criteria: [(u32, fn() -> Check); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = Vec::new();
    for (k, run) in criteria {
        let t = Instant::now();
        match run() {
            Ok(msg) => println!("criterion {k}: PASS ({:.1}s) {msg}", t.elapsed().as_secs_f64()),
            Err(msg) => {
                println!("criterion {k}: FAIL ({:.1}s) {msg}", t.elapsed().as_secs_f64());
                failed.push(k);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
