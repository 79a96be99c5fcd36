use std::process::Command;

use capcert_cli::{run, EXIT_OK, EXIT_POSITIVITY, EXIT_RESOURCE, EXIT_USAGE};

fn capcert(args: &[&str]) -> capcert_cli::Outcome {
    run(std::iter::once("capcert").chain(args.iter().copied()))
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn flat_capacity_encloses_ln4() {
    let out = capcert(&["capacity", "--psd", "1", "--bandwidth", "1", "--power", "3", "--precision-bits", "20"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let lo: f64 = field(&out.stdout, "lower").parse().unwrap();
    let hi: f64 = field(&out.stdout, "upper").parse().unwrap();
    assert!(lo <= 4f64.ln() && 4f64.ln() <= hi);
    assert_eq!(field(&out.stdout, "regime"), "NO_CLIP_CERTIFIED");
    assert_eq!(field(&out.stdout, "error_bound"), "0.00000095367431640625");
    assert!(out.stdout.contains("quadrature_cells: "));
}

#[test]
fn noise_touching_zero_exits_3() {
    let out = capcert(&["capacity", "--psd", "f", "--bandwidth", "1", "--power", "1", "--precision-bits", "8"]);
    assert_eq!(out.code, EXIT_POSITIVITY);
    assert_eq!(out.stderr.lines().count(), 1);
}

#[test]
fn certify_min_above() {
    let out = capcert(&["certify", "--psd", "2+sin(pi*f)", "--bandwidth", "1", "--min-above", "1/2"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(field(&out.stdout, "outcome"), "CERTIFIED");
    let out = capcert(&["certify", "--psd", "2+sin(pi*f)", "--min-above", "5/2"]);
    assert_eq!(out.code, EXIT_POSITIVITY);
    assert_eq!(field(&out.stdout, "outcome"), "REFUTED");
    let out = capcert(&["certify", "--psd", "1+f", "--power", "1/10", "--no-clip"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(field(&out.stdout, "regime"), "CLIPPED");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["capacity", "--psd", "1+", "--power", "1"],
        vec!["capacity", "--psd", "1", "--power", "x"],
        vec!["capacity", "--psd", "1"],
        vec!["frobnicate"],
        vec!["psd", "--psd", "1+f", "--power", "1", "--freq", "1/3"],
        vec!["psd", "--psd", "1+f", "--power", "1", "--freq", "2"],
        vec!["capacity", "--psd", "catalog:nope", "--power", "1"],
        vec!["capacity", "--psd", "1", "--power", "1", "--precision-bits", "8", "--digits", "3"],
    ] {
        let out = capcert(&args);
        assert_eq!(out.code, EXIT_USAGE, "{args:?}: {}", out.stderr);
        assert_eq!(out.stderr.lines().count(), 1, "{args:?}");
    }
}

#[test]
fn cell_ceiling_exits_4() {
    let out = Command::new(env!("CARGO_BIN_EXE_capcert"))
        .args(["capacity", "--psd", "1+f", "--power", "2", "--route", "modulus", "--precision-bits", "20"])
        .env("CAPCERT_MAX_CELLS", "1000")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_RESOURCE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ceiling"));
}

#[test]
fn json_and_csv_round_trip() {
    let out = capcert(&["capacity", "--psd", "catalog:affine", "--power", "2", "--precision-bits", "16", "--format", "json"]);
    assert_eq!(out.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let value: f64 = v["value"].as_str().unwrap().parse().unwrap();
    assert!((value - (3.5f64.ln() - (2.0 * 2f64.ln() - 1.0))).abs() < 2f64.powi(-16));
    for key in ["error_bound", "regime", "psd_evals", "quadrature_cells", "max_precision_requested", "bisection_iters"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }

    let out = capcert(&["discretize", "--psd", "1+f", "--power", "2", "--subchannels", "2", "--format", "csv"]);
    assert_eq!(out.code, EXIT_OK);
    let mut r = csv::Reader::from_reader(out.stdout.as_bytes());
    let headers = r.headers().unwrap().clone();
    let row = r.records().next().unwrap().unwrap();
    let get = |k: &str| row.get(headers.iter().position(|h| h == k).unwrap()).unwrap().to_string();
    assert_eq!(get("level"), "7/2");
    assert_eq!(get("sub_levels"), "9/4;7/4");
}

#[test]
fn water_level_and_psd_in_clipped_regime() {
    let out = capcert(&["water-level", "--psd", "1+f", "--power", "1/10", "--precision-bits", "14"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(field(&out.stdout, "method"), "bisection");
    let l: f64 = field(&out.stdout, "value").parse().unwrap();
    assert!((l - (1.0 + 0.2f64.sqrt())).abs() < 1e-3);
    let out = capcert(&["psd", "--psd", "1+f", "--power", "1/10", "--freq", "0", "--precision-bits", "12"]);
    assert_eq!(out.code, EXIT_OK);
    let v: f64 = field(&out.stdout, "value").parse().unwrap();
    assert!((v - 0.2f64.sqrt()).abs() < 2f64.powi(-12));
}

#[test]
fn capacity_in_bits() {
    let out = capcert(&["capacity", "--psd", "1", "--power", "3", "--unit", "bits", "--digits", "6"]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(field(&out.stdout, "precision_bits"), "20");
    let v: f64 = field(&out.stdout, "value").parse().unwrap();
    assert!((v - 2.0).abs() < 2f64.powi(-20));
}

#[test]
fn bench_emits_profiler_schema() {
    let out = capcert(&["bench", "--psd", "1", "--power", "3", "--precisions", "8,16,24", "--format", "csv"]);
    assert_eq!(out.code, EXIT_OK);
    let reports = capcert_core::profiler::parse_report(&out.stdout, capcert_core::profiler::Format::Csv).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().all(|r| r.quadrature_cells == 0));
    assert!(out.stderr.contains(capcert_core::profiler::DISCLAIMER));
    let text = capcert(&["bench", "--psd", "1", "--power", "3", "--precisions", "8,16,24"]);
    assert!(text.stdout.contains(capcert_core::profiler::DISCLAIMER));
}

#[test]
fn help_exits_0() {
    let out = capcert(&["--help"]);
    assert_eq!(out.code, EXIT_OK);
    assert!(out.stdout.contains("capacity"));
}
