mod common;

use capcert_core::cfunc::catalog;
use capcert_core::waterfill::{self, CapacityPath, Regime};
use capcert_core::{ChannelSpec, Dyadic, WorkMeter};
use common::constants::*;
use common::{dec, pow2, q};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

fn int(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

fn within(v: &Dyadic, truth: &BigRational, k: i64) -> bool {
    (v.to_rational() - truth).abs() <= pow2(-k)
}

#[test]
fn clipped_capacity_matches_closed_form() {
    let spec = ChannelSpec::from_catalog("affine", int(1), q(1, 10)).unwrap();
    let c = waterfill::capacity(&spec, 12, &WorkMeter::default()).unwrap();
    assert_eq!(c.path, CapacityPath::General);
    assert_eq!(c.regime, Regime::Clipped);
    assert!(within(&c.value, &dec(C_CLIPPED), 12));
}

#[test]
fn general_path_agrees_with_no_clip_formula() {
    let spec = ChannelSpec::from_catalog("sine", int(1), int(2)).unwrap();
    let m = WorkMeter::default();
    let general = waterfill::capacity_with(&spec, 10, &m, waterfill::Options { route: None, force_general: true }).unwrap();
    assert_eq!(general.path, CapacityPath::General);
    assert!(within(&general.value, &dec(C_SINE), 10));
    let fast = waterfill::capacity(&spec, 24, &m).unwrap();
    assert_eq!(fast.path, CapacityPath::NoClip);
    assert!(within(&fast.value, &dec(C_SINE), 24));
}

#[test]
fn regime_consistency_between_level_paths() {
    for name in ["affine", "sine", "halfsine", "decay", "sqrt"] {
        let spec = ChannelSpec::from_catalog(name, int(1), int(3)).unwrap();
        let m = WorkMeter::default();
        let closed = waterfill::water_level_closed(&spec, &m).unwrap();
        assert_eq!(closed.regime, Regime::NoClipCertified, "{name}");
        let general = waterfill::water_level_general(&spec, 12, &m).unwrap();
        let l = closed.level.query(24).unwrap().to_rational();
        let gap = (&l - general.level.query(0).unwrap().to_rational()).abs();
        assert!(gap <= &general.uncertainty + pow2(-24), "{name}: gap {gap}");
        let (lo, hi) = general.bracket.clone().unwrap();
        assert!(lo - pow2(-24) <= l && l <= hi + pow2(-24), "{name}: bracket misses closed form");
    }
}

#[test]
fn bracket_halves_and_never_inverts() {
    let spec = ChannelSpec::from_catalog("cosine", int(1), q(1, 5)).unwrap();
    let wl = waterfill::water_level_general(&spec, 14, &WorkMeter::default()).unwrap();
    assert!(!wl.widths.is_empty());
    for w in wl.widths.windows(2) {
        assert!(w[1].is_positive());
        assert_eq!(&w[0] / int(2), w[1]);
    }
    let (lo, hi) = wl.bracket.unwrap();
    assert!(lo <= hi);
}

#[test]
fn capacity_is_monotone_in_power() {
    let m = 8u32;
    let slack = pow2(1 - m as i64);
    for name in catalog::names().iter().filter(|n| !n.starts_with("stress-4")) {
        let mut prev: Option<BigRational> = None;
        for p in [q(1, 8), q(1, 2), int(2)] {
            let spec = ChannelSpec::from_catalog(name, int(1), p).unwrap();
            let c = waterfill::capacity(&spec, m, &WorkMeter::default()).unwrap().value.to_rational();
            assert!(c.is_positive(), "{name}");
            if let Some(p) = &prev {
                assert!(p <= &(&c + &slack), "{name}: capacity decreased with power");
            }
            prev = Some(c);
        }
    }
}

#[test]
fn noise_scaling_shifts_capacity_by_log_ratio() {
    // C(P, beta N) - C(P, N) = B ln(L_beta / L_1) - B ln beta in the no-clip regime
    let m = 16u32;
    let base = ChannelSpec::from_catalog("affine", int(1), int(3)).unwrap();
    let c1 = waterfill::capacity(&base, m, &WorkMeter::default()).unwrap();
    let l1 = waterfill::water_level_closed(&base, &WorkMeter::default()).unwrap();
    for beta in [q(1, 2), q(3, 2), int(2)] {
        let scaled = base.with_noise(base.noise().scale(&beta)).unwrap();
        let cb = waterfill::capacity(&scaled, m, &WorkMeter::default()).unwrap();
        let lb = waterfill::water_level_closed(&scaled, &WorkMeter::default()).unwrap();
        assert_eq!(lb.regime, Regime::NoClipCertified);
        let ratio = lb.level.query(60).unwrap().to_rational() / l1.level.query(60).unwrap().to_rational();
        let predicted = common::ref_ln(&ratio, 40) - common::ref_ln(&beta, 40);
        let diff = cb.value.to_rational() - c1.value.to_rational();
        assert!((diff - predicted).abs() <= pow2(2 - m as i64), "beta = {beta}");
    }
}

#[test]
fn flat_noise_discretization_is_exact() {
    let spec = ChannelSpec::from_expr("1", int(1), int(3)).unwrap();
    let truth = dec(C_FLAT);
    for n_sub in [1u64, 3, 7, 16] {
        let d = waterfill::discretized_capacity(&spec, n_sub, 40, &WorkMeter::default()).unwrap();
        assert!(within(&d.c_n, &truth, 40), "n_sub = {n_sub}");
        let power: BigRational = d.sub_levels.iter().map(|p| p * &d.delta_f).sum();
        assert_eq!(power, int(3));
    }
    let table = waterfill::convergence_study(&spec, &[2, 4, 8], 20, &WorkMeter::default()).unwrap();
    for row in &table.rows {
        assert!(row.error_hi <= pow2(-19), "n_sub = {}", row.n_sub);
    }
}

#[test]
fn convergence_study_affine_is_second_order() {
    let spec = ChannelSpec::from_catalog("affine", int(1), int(2)).unwrap();
    let table = waterfill::convergence_study(&spec, &[2, 4, 8, 16, 32], 30, &WorkMeter::default()).unwrap();
    assert!(table.strictly_decreasing());
    let order = table.order.unwrap();
    assert!((1.8..2.2).contains(&order), "order {order}");
}

#[test]
fn discretized_power_is_conserved_when_clipped() {
    let spec = ChannelSpec::from_catalog("halfsine", int(1), q(1, 20)).unwrap();
    for n_sub in [5u64, 32] {
        let d = waterfill::discretized_capacity(&spec, n_sub, 30, &WorkMeter::default()).unwrap();
        let power: BigRational = d.sub_levels.iter().map(|p| p * &d.delta_f).sum();
        assert_eq!(power, q(1, 20));
        assert!(d.sub_levels.iter().any(|p| p.is_zero()));
    }
}

#[test]
fn psd_rejects_out_of_band_frequency() {
    let spec = ChannelSpec::from_catalog("affine", int(1), int(2)).unwrap();
    let wl = waterfill::water_level_closed(&spec, &WorkMeter::default()).unwrap();
    assert!(waterfill::psd_at(&spec, &wl, &Dyadic::from_int(-1), 8).is_err());
    let v = waterfill::psd_at(&spec, &wl, &Dyadic::pow2(-1), 20).unwrap();
    assert!(within(&v.value, &int(2), 20));
}

#[test]
fn wide_band_channel() {
    // B = 3 with flat noise 1/2: C = 3 ln(1 + P / (3/2))
    let spec = ChannelSpec::from_expr("1/2+0*f", int(3), int(3)).unwrap();
    let c = waterfill::capacity(&spec, 20, &WorkMeter::default()).unwrap();
    let truth = common::ref_ln(&int(3), 60) * int(3);
    assert!(within(&c.value, &truth, 20));
}
