//! Work-versus-precision measurement.
//!
//! Work is counted in noise evaluations, quadrature cells, bisection steps
//! and the largest precision requested, so the numbers are machine
//! independent and reproducible.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::waterfill::{self, ChannelSpec, Options, Regime};
use crate::work::{Limits, WorkCounts, WorkMeter};

/// Printed with every human-readable report.
pub const DISCLAIMER: &str = "note: work counts show how cost grows with requested precision on these inputs; \
they do not demonstrate #P_1-hardness or any lower bound.";

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 10] = [
    "spec_id",
    "target",
    "precision_bits",
    "psd_evals",
    "quadrature_cells",
    "max_precision_requested",
    "bisection_iters",
    "wall_time_s",
    "value",
    "error_bound",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Capacity,
    WaterLevel,
    PsdAt(Dyadic),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Capacity => f.write_str("capacity"),
            Target::WaterLevel => f.write_str("water_level"),
            Target::PsdAt(x) => write!(f, "psd_at({x})"),
        }
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "capacity" => Ok(Target::Capacity),
            "water_level" | "water-level" => Ok(Target::WaterLevel),
            _ => {
                let inner = s
                    .strip_prefix("psd_at(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown target {s}")))?;
                Ok(Target::PsdAt(inner.parse()?))
            }
        }
    }
}

/// One measured run. `value` and `error_bound` are exact decimal renderings of dyadics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkReport {
    pub spec_id: String,
    pub target: String,
    pub precision_bits: u32,
    pub psd_evals: u64,
    pub quadrature_cells: u64,
    pub max_precision_requested: u64,
    pub bisection_iters: u64,
    pub wall_time_s: f64,
    pub value: String,
    pub error_bound: String,
}

impl WorkReport {
    pub fn counts(&self) -> WorkCounts {
        WorkCounts {
            psd_evals: self.psd_evals,
            quadrature_cells: self.quadrature_cells,
            max_precision_requested: self.max_precision_requested,
            bisection_iters: self.bisection_iters,
        }
    }

    pub fn value(&self) -> Result<Dyadic> {
        self.value.parse()
    }

    pub fn get(&self, counter: Counter) -> u64 {
        match counter {
            Counter::PsdEvals => self.psd_evals,
            Counter::QuadratureCells => self.quadrature_cells,
            Counter::MaxPrecisionRequested => self.max_precision_requested,
            Counter::BisectionIters => self.bisection_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counter {
    PsdEvals,
    QuadratureCells,
    MaxPrecisionRequested,
    BisectionIters,
}

impl FromStr for Counter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psd_evals" => Ok(Counter::PsdEvals),
            "quadrature_cells" => Ok(Counter::QuadratureCells),
            "max_precision_requested" => Ok(Counter::MaxPrecisionRequested),
            "bisection_iters" => Ok(Counter::BisectionIters),
            _ => Err(Error::InvalidArgument(format!("unknown counter {s}"))),
        }
    }
}

/// Path and resource settings for a sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub paths: Options,
    pub limits: Limits,
}

pub fn sweep_precision(spec: &ChannelSpec, m_list: &[u32], target: &Target) -> Result<Vec<WorkReport>> {
    sweep_precision_with(spec, m_list, target, SweepOptions::default())
}

/// One report per precision, each with its own counters.
pub fn sweep_precision_with(spec: &ChannelSpec, m_list: &[u32], target: &Target, opts: SweepOptions) -> Result<Vec<WorkReport>> {
    if m_list.is_empty() {
        return Err(Error::InvalidArgument("precision list is empty".into()));
    }
    if m_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("precision list must be ascending".into()));
    }
    m_list.iter().map(|&m| measure(spec, m, target, opts)).collect()
}

fn measure(spec: &ChannelSpec, m: u32, target: &Target, opts: SweepOptions) -> Result<WorkReport> {
    let meter = WorkMeter::new(opts.limits);
    let start = Instant::now();
    let (value, error_bound) = run_target(spec, m, target, &meter, opts.paths)?;
    let wall = start.elapsed().as_secs_f64();
    let c = meter.counts();
    Ok(WorkReport {
        spec_id: spec.id().to_string(),
        target: target.to_string(),
        precision_bits: m,
        psd_evals: c.psd_evals,
        quadrature_cells: c.quadrature_cells,
        max_precision_requested: c.max_precision_requested,
        bisection_iters: c.bisection_iters,
        wall_time_s: wall,
        value: value.to_decimal_exact(),
        error_bound: error_bound.to_decimal_exact(),
    })
}

fn run_target(spec: &ChannelSpec, m: u32, target: &Target, meter: &WorkMeter, opts: Options) -> Result<(Dyadic, Dyadic)> {
    match target {
        Target::Capacity => {
            let c = waterfill::capacity_with(spec, m, meter, opts)?;
            Ok((c.value.clone(), c.error_bound()))
        }
        Target::WaterLevel => {
            let wl = level(spec, m, meter, opts)?;
            let err = level_error(&wl, m);
            Ok((wl.level.query(m)?, err))
        }
        Target::PsdAt(f) => {
            let wl = level(spec, m, meter, opts)?;
            let v = waterfill::psd_at(spec, &wl, f, m + 1)?;
            let err = &Dyadic::pow2(-(m as i64) - 1) + &level_error(&wl, m + 1);
            Ok((v.value, err))
        }
    }
}

fn level(spec: &ChannelSpec, m: u32, meter: &WorkMeter, opts: Options) -> Result<waterfill::WaterLevel> {
    if !opts.force_general {
        let wl = waterfill::water_level_closed_with(spec, meter, opts)?;
        if wl.regime == Regime::NoClipCertified {
            return Ok(wl);
        }
    }
    waterfill::water_level_general_with(spec, m, meter, opts)
}

/// Dyadic upper bound on the distance of the reported level from the true one.
fn level_error(wl: &waterfill::WaterLevel, m: u32) -> Dyadic {
    let u = &wl.uncertainty;
    let u = Dyadic::ceil_ratio(u.numer(), u.denom(), m as i64 + 8).expect("nonzero denominator");
    &Dyadic::pow2(-(m as i64)) + &u
}

/// Least-squares slope of `log2(counter)` against precision bits.
pub fn fit_growth(reports: &[WorkReport], counter: Counter) -> Result<f64> {
    if reports.len() < 3 {
        return Err(Error::DegenerateGrowth(format!("need at least 3 reports, got {}", reports.len())));
    }
    let vals: Vec<u64> = reports.iter().map(|r| r.get(counter)).collect();
    if vals.iter().any(|&v| v == 0) {
        return Err(Error::DegenerateGrowth(format!("counter {counter:?} is zero in some report")));
    }
    if vals.iter().all(|&v| v == vals[0]) {
        return Err(Error::DegenerateGrowth(format!("counter {counter:?} is constant")));
    }
    let pts: Vec<(f64, f64)> = reports.iter().zip(&vals).map(|(r, &v)| (r.precision_bits as f64, (v as f64).log2())).collect();
    waterfill::least_squares_slope(&pts)
        .ok_or_else(|| Error::DegenerateGrowth("all reports share one precision".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Text,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            _ => Err(Error::InvalidArgument(format!("unknown format {s}"))),
        }
    }
}

pub fn emit_report(reports: &[WorkReport], format: Format) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(CSV_COLUMNS).map_err(io_err)?;
            for r in reports {
                w.serialize(r).map_err(io_err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => serde_json::to_string_pretty(reports).map_err(|e| Error::InvalidArgument(e.to_string())),
        Format::Text => {
            let mut out = String::new();
            for r in reports {
                out.push_str(&format!(
                    "{} {} M={}: value={} error<={} psd_evals={} cells={} max_prec={} bisections={} time={:.3}s\n",
                    r.spec_id,
                    r.target,
                    r.precision_bits,
                    short(&r.value),
                    short(&r.error_bound),
                    r.psd_evals,
                    r.quadrature_cells,
                    r.max_precision_requested,
                    r.bisection_iters,
                    r.wall_time_s
                ));
            }
            out.push_str(DISCLAIMER);
            out.push('\n');
            Ok(out)
        }
    }
}

fn short(s: &str) -> String {
    match s.parse::<Dyadic>() {
        Ok(d) if s.len() > 24 => format!("{:.3e}", d.to_f64()),
        _ => s.to_string(),
    }
}

/// Parse a document produced by [`emit_report`] in CSV or JSON form.
pub fn parse_report(doc: &str, format: Format) -> Result<Vec<WorkReport>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(doc.as_bytes());
            let headers = r.headers().map_err(io_err)?.clone();
            if headers.iter().ne(CSV_COLUMNS) {
                return Err(Error::InvalidArgument(format!("unexpected CSV header {headers:?}")));
            }
            r.deserialize().map(|row| row.map_err(io_err)).collect()
        }
        Format::Json => serde_json::from_str(doc).map_err(|e| Error::InvalidArgument(e.to_string())),
        Format::Text => Err(Error::Unsupported("text reports are not machine readable".into())),
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::InvalidArgument(e.to_string())
}
