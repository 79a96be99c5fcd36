//! Argument handling and output rendering for the `capcert` binary.

use std::time::Instant;

use capcert_core::cfunc::{catalog, certify_bounds, BoundMode};
use capcert_core::profiler::{self, Counter, Format, SweepOptions, Target};
use capcert_core::rational::parse_rational;
use capcert_core::rigorint::Route;
use capcert_core::waterfill::{self, LevelMethod, Options, Regime};
use capcert_core::work::{Limits, DEFAULT_MAX_CELLS, MAX_CELLS_ENV};
use capcert_core::{creal, CFunc, CertifyOutcome, ChannelSpec, Dyadic, Error, WorkMeter};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_POSITIVITY: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "capcert", version, about = "Certified capacity of Gaussian channels with colored noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacity C(P, N) within 2^-M
    Capacity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Unit::Nats)]
        unit: Unit,
        /// Quadrature route (default: cheapest available)
        #[arg(long, value_enum)]
        route: Option<RouteArg>,
        /// Use the clipped-regime algorithm even when no-clip is certified
        #[arg(long)]
        general: bool,
    },
    /// Water level L
    WaterLevel {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
    },
    /// Optimal input spectrum P*(f) = [L - N(f)]_+ at one frequency
    Psd {
        #[command(flatten)]
        common: Common,
        /// Frequency in [0, B], a dyadic such as 3/8 or 0.375
        #[arg(long)]
        freq: String,
    },
    /// Capacity of n parallel subchannels sampled at band midpoints
    Discretize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subchannels: u64,
        #[arg(long, value_enum, default_value_t = Unit::Nats)]
        unit: Unit,
    },
    /// Certify bounds on the noise or the no-clip regime
    Certify {
        #[command(flatten)]
        noise: NoiseArgs,
        #[command(flatten)]
        precision: Precision,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
        #[command(flatten)]
        claim: Claim,
        /// Signal power, required by --no-clip
        #[arg(long)]
        power: Option<String>,
    },
    /// Work-versus-precision sweep
    Bench {
        #[command(flatten)]
        noise: NoiseArgs,
        #[arg(long)]
        power: String,
        /// Comma-separated ascending precisions
        #[arg(long, value_delimiter = ',', default_value = "8,12,16")]
        precisions: Vec<u32>,
        /// capacity, water_level or psd_at(<f>)
        #[arg(long, default_value = "capacity")]
        target: String,
        #[arg(long, value_enum)]
        route: Option<RouteArg>,
        #[arg(long)]
        general: bool,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Noise spectrum: an expression in f, or catalog:<name>
    #[arg(long)]
    pub psd: String,
    #[arg(long, default_value = "1")]
    pub bandwidth: String,
}

#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct Precision {
    /// Output accuracy 2^-M
    #[arg(long = "precision-bits")]
    pub bits: Option<u32>,
    /// Decimal digits, converted to ceil(d log2 10) bits
    #[arg(long)]
    pub digits: Option<u32>,
}

impl Precision {
    fn bits(&self) -> u32 {
        match (self.bits, self.digits) {
            (Some(b), _) => b,
            (None, Some(d)) => digits_to_bits(d),
            (None, None) => 20,
        }
    }
}

pub fn digits_to_bits(d: u32) -> u32 {
    (d as f64 * 10f64.log2()).ceil() as u32
}

#[derive(Debug, Args)]
pub struct Common {
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub power: String,
    #[command(flatten)]
    pub precision: Precision,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Claim {
    /// Certify min N > q
    #[arg(long)]
    pub min_above: Option<String>,
    /// Certify max N < q
    #[arg(long)]
    pub max_below: Option<String>,
    /// Certify that the closed-form water level clears the noise
    #[arg(long)]
    pub no_clip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Nats,
    Bits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Auto,
    Closed,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Modulus,
    Smooth,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Route {
        match r {
            RouteArg::Modulus => Route::Modulus,
            RouteArg::Smooth => Route::Smooth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Csv,
    Json,
}

/// Exit code with the text for each stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { code: EXIT_OK, stdout, stderr: String::new() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingWitness(_) | Error::WitnessViolation(_) => EXIT_POSITIVITY,
        Error::CellLimit { .. } | Error::PrecisionExhausted(_) => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

fn fail(e: &Error) -> Outcome {
    Outcome { code: exit_code(e), stdout: String::new(), stderr: format!("capcert: {e}\n") }
}

/// Run with full argv (program name first) and the cell ceiling from the environment.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome::ok(text)
            } else {
                let first = text.lines().next().unwrap_or("usage error").to_string();
                Outcome { code, stdout: String::new(), stderr: format!("{first}\n") }
            };
        }
    };
    let limits = match limits_from_env() {
        Ok(l) => l,
        Err(e) => return fail(&e),
    };
    match execute(&cli.command, limits) {
        Ok(o) => o,
        Err(e) => fail(&e),
    }
}

fn limits_from_env() -> capcert_core::Result<Limits> {
    match std::env::var(MAX_CELLS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(|max_cells| Limits { max_cells })
            .map_err(|_| Error::InvalidArgument(format!("{MAX_CELLS_ENV} must be a positive integer, got {v}"))),
        Err(_) => Ok(Limits { max_cells: DEFAULT_MAX_CELLS }),
    }
}

fn rational_arg(name: &str, s: &str) -> capcert_core::Result<BigRational> {
    parse_rational(s).map_err(|e| Error::InvalidArgument(format!("--{name} {s}: {e}")))
}

fn noise_fn(args: &NoiseArgs) -> capcert_core::Result<(CFunc, BigRational)> {
    let b = rational_arg("bandwidth", &args.bandwidth)?;
    if !b.is_positive() {
        return Err(Error::InvalidArgument(format!("--bandwidth must be positive, got {b}")));
    }
    let f = match args.psd.strip_prefix("catalog:") {
        Some(name) => catalog::noise(name, &b)?,
        None => CFunc::parse(&args.psd, BigRational::zero(), b.clone())?,
    };
    Ok((f, b))
}

fn channel(noise: &NoiseArgs, power: &str) -> capcert_core::Result<ChannelSpec> {
    let (f, b) = noise_fn(noise)?;
    ChannelSpec::new(b, rational_arg("power", power)?, f)
}

fn execute(cmd: &Command, limits: Limits) -> capcert_core::Result<Outcome> {
    let meter = WorkMeter::new(limits);
    let start = Instant::now();
    match cmd {
        Command::Capacity { common, unit, route, general } => {
            let spec = channel(&common.noise, &common.power)?;
            let m = common.precision.bits();
            let opts = Options { route: route.map(Route::from), force_general: *general };
            let extra = if *unit == Unit::Bits { 2 } else { 0 };
            let c = waterfill::capacity_with(&spec, m + extra, &meter, opts)?;
            let value = in_unit(&c.value, *unit, m)?;
            let mut rec = Record::new("capacity", &spec, m);
            rec.push("unit", json!(unit_name(*unit)));
            rec.value(&value, m);
            rec.push("regime", json!(c.regime.to_string()));
            rec.push("path", json!(c.path.to_string()));
            rec.work(&meter, start);
            Ok(Outcome::ok(rec.render(common.format)?))
        }
        Command::WaterLevel { common, method } => {
            let spec = channel(&common.noise, &common.power)?;
            let m = common.precision.bits();
            let wl = match method {
                Method::General => waterfill::water_level_general(&spec, m, &meter)?,
                Method::Closed => waterfill::water_level_closed(&spec, &meter)?,
                Method::Auto => {
                    let wl = waterfill::water_level_closed(&spec, &meter)?;
                    if wl.regime == Regime::NoClipCertified {
                        wl
                    } else {
                        waterfill::water_level_general(&spec, m, &meter)?
                    }
                }
            };
            let mut rec = Record::new("water-level", &spec, m);
            let value = wl.level.query(m)?;
            let err = rational_dyadic_up(&(capcert_core::rational::pow2(-(m as i64)) + &wl.uncertainty), m);
            rec.value_with_error(&value, &err);
            rec.push("regime", json!(wl.regime.to_string()));
            rec.push("method", json!(if wl.method == LevelMethod::ClosedForm { "closed-form" } else { "bisection" }));
            rec.push("valid", json!(wl.is_valid()));
            if let Some((lo, hi)) = &wl.bracket {
                rec.push("bracket_lo", json!(lo.to_string()));
                rec.push("bracket_hi", json!(hi.to_string()));
            }
            rec.push("avg_noise", json!(wl.avg_noise.query(m)?.to_decimal(decimal_digits(m))));
            rec.work(&meter, start);
            Ok(Outcome::ok(rec.render(common.format)?))
        }
        Command::Psd { common, freq } => {
            let spec = channel(&common.noise, &common.power)?;
            let m = common.precision.bits();
            let fq = rational_arg("freq", freq)?;
            let f = Dyadic::try_from_rational(&fq)
                .ok_or_else(|| Error::InvalidArgument(format!("--freq must be a dyadic rational, got {fq}")))?;
            let closed = waterfill::water_level_closed(&spec, &meter)?;
            let wl = if closed.regime == Regime::NoClipCertified {
                closed
            } else {
                waterfill::water_level_general(&spec, m + 1, &meter)?
            };
            let v = waterfill::psd_at(&spec, &wl, &f, m + 1)?;
            let err = rational_dyadic_up(&v.error_bound(), m + 1);
            let mut rec = Record::new("psd", &spec, m);
            rec.push("freq", json!(f.to_decimal_exact()));
            rec.value_with_error(&v.value, &err);
            rec.push("regime", json!(wl.regime.to_string()));
            rec.push("level_uncertainty", json!(short(&rational_dyadic_up(&v.level_uncertainty, m + 8))));
            rec.work(&meter, start);
            Ok(Outcome::ok(rec.render(common.format)?))
        }
        Command::Discretize { common, subchannels, unit } => {
            let spec = channel(&common.noise, &common.power)?;
            let m = common.precision.bits();
            let extra = if *unit == Unit::Bits { 2 } else { 0 };
            let d = waterfill::discretized_capacity(&spec, *subchannels, m + extra, &meter)?;
            let value = in_unit(&d.c_n, *unit, m)?;
            let mut rec = Record::new("discretize", &spec, m);
            rec.push("unit", json!(unit_name(*unit)));
            rec.push("subchannels", json!(d.n_sub));
            rec.push("delta_f", json!(d.delta_f.to_string()));
            rec.value(&value, m);
            rec.push("level", json!(d.level.to_string()));
            let subs: Vec<Value> = d.sub_levels.iter().map(|p| json!(p.to_string())).collect();
            rec.push("sub_levels", Value::Array(subs));
            rec.work(&meter, start);
            Ok(Outcome::ok(rec.render(common.format)?))
        }
        Command::Certify { noise, precision, format, claim, power } => {
            let (f, b) = noise_fn(noise)?;
            let n = precision.bits.or(precision.digits.map(digits_to_bits)).unwrap_or(12);
            let mut rec = Record::bare("certify", f.name(), n);
            let certified = if let Some(q) = &claim.min_above {
                let q = rational_arg("min-above", q)?;
                let out = certify_bounds(&f, BoundMode::MinAbove, &q, n)?;
                rec.push("claim", json!(format!("min N > {q}")));
                rec.push("outcome", json!(out.to_string()));
                out == CertifyOutcome::Certified
            } else if let Some(q) = &claim.max_below {
                let q = rational_arg("max-below", q)?;
                let out = certify_bounds(&f, BoundMode::MaxBelow, &q, n)?;
                rec.push("claim", json!(format!("max N < {q}")));
                rec.push("outcome", json!(out.to_string()));
                out == CertifyOutcome::Certified
            } else {
                let p = power.as_deref().ok_or_else(|| Error::InvalidArgument("--no-clip needs --power".into()))?;
                let spec = ChannelSpec::new(b, rational_arg("power", p)?, f)?;
                let wl = waterfill::water_level_closed(&spec, &meter)?;
                rec.push("claim", json!("closed-form level >= max N"));
                let outcome = match wl.regime {
                    Regime::NoClipCertified => CertifyOutcome::Certified,
                    Regime::Clipped => CertifyOutcome::Refuted,
                    Regime::Unresolved => CertifyOutcome::Unresolved,
                };
                rec.push("outcome", json!(outcome.to_string()));
                rec.push("regime", json!(wl.regime.to_string()));
                true
            };
            rec.work(&meter, start);
            let mut out = Outcome::ok(rec.render(*format)?);
            if claim.min_above.is_some() && !certified {
                out.code = EXIT_POSITIVITY;
                out.stderr = "capcert: positivity bound not certified\n".into();
            }
            Ok(out)
        }
        Command::Bench { noise, power, precisions, target, route, general, format } => {
            let spec = channel(noise, power)?;
            let target: Target = target.parse()?;
            let opts = SweepOptions { paths: Options { route: route.map(Route::from), force_general: *general }, limits };
            let reports = profiler::sweep_precision_with(&spec, precisions, &target, opts)?;
            let fmt = match format {
                FormatArg::Text => Format::Text,
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            let mut stdout = profiler::emit_report(&reports, fmt)?;
            let slope = match profiler::fit_growth(&reports, Counter::QuadratureCells) {
                Ok(s) => format!("growth slope of quadrature_cells per bit: {s:.3}"),
                Err(e) => format!("growth slope of quadrature_cells per bit: {e}"),
            };
            let mut stderr = String::new();
            if fmt == Format::Text {
                stdout.push_str(&slope);
                stdout.push('\n');
            } else {
                stderr = format!("{slope}\n{}\n", profiler::DISCLAIMER);
            }
            Ok(Outcome { code: EXIT_OK, stdout, stderr })
        }
    }
}

fn unit_name(u: Unit) -> &'static str {
    match u {
        Unit::Nats => "nats",
        Unit::Bits => "bits",
    }
}

/// A nats value certified to `2^-(m+2)` converted to `unit`, within `2^-m`.
fn in_unit(nats: &Dyadic, unit: Unit, m: u32) -> capcert_core::Result<Dyadic> {
    match unit {
        Unit::Nats => Ok(nats.clone()),
        Unit::Bits => {
            let s = nats.abs().log2_ceil().unwrap_or(0).max(0) as u32 + 1;
            let l = creal::ln2().query(m + 4 + s)?;
            let q = nats.to_rational() / l.to_rational();
            Ok(Dyadic::from_big_rational(&q, m as i64 + 3))
        }
    }
}

fn decimal_digits(m: u32) -> usize {
    (m as f64 * 2f64.log10()).ceil() as usize + 2
}

fn rational_dyadic_up(q: &BigRational, m: u32) -> Dyadic {
    Dyadic::ceil_ratio(q.numer(), q.denom(), m as i64 + 4).expect("nonzero denominator")
}

fn short(d: &Dyadic) -> String {
    let s = d.to_decimal_exact();
    if s.len() > 24 {
        format!("{:.6e}", d.to_f64())
    } else {
        s
    }
}

/// Ordered key/value output shared by the text, CSV and JSON renderers.
struct Record {
    fields: Vec<(&'static str, Value)>,
}

impl Record {
    fn bare(command: &str, spec_id: &str, m: u32) -> Self {
        Record {
            fields: vec![
                ("command", json!(command)),
                ("spec_id", json!(spec_id)),
                ("precision_bits", json!(m)),
            ],
        }
    }

    fn new(command: &str, spec: &ChannelSpec, m: u32) -> Self {
        Self::bare(command, spec.id(), m)
    }

    fn push(&mut self, key: &'static str, v: Value) {
        self.fields.push((key, v));
    }

    fn value(&mut self, v: &Dyadic, m: u32) {
        self.value_with_error(v, &Dyadic::pow2(-(m as i64)));
    }

    fn value_with_error(&mut self, v: &Dyadic, err: &Dyadic) {
        let m = self.fields.iter().find(|f| f.0 == "precision_bits").and_then(|f| f.1.as_u64()).unwrap_or(20) as u32;
        let digits = decimal_digits(m);
        self.push("value", json!(v.to_decimal(digits)));
        self.push("error_bound", json!(short(err)));
        self.push("lower", json!((v - err).to_decimal(digits + 1)));
        self.push("upper", json!((v + err).to_decimal(digits + 1)));
        self.push("value_exact", json!(v.to_decimal_exact()));
    }

    fn work(&mut self, meter: &WorkMeter, start: Instant) {
        let c = meter.counts();
        self.push("psd_evals", json!(c.psd_evals));
        self.push("quadrature_cells", json!(c.quadrature_cells));
        self.push("max_precision_requested", json!(c.max_precision_requested));
        self.push("bisection_iters", json!(c.bisection_iters));
        self.push("wall_time_s", json!(start.elapsed().as_secs_f64()));
    }

    fn render(&self, format: FormatArg) -> capcert_core::Result<String> {
        match format {
            FormatArg::Text => {
                let mut out = String::new();
                for (k, v) in &self.fields {
                    let s = match v {
                        Value::String(s) => s.clone(),
                        Value::Array(a) => a.iter().map(plain).collect::<Vec<_>>().join(" "),
                        other => other.to_string(),
                    };
                    out.push_str(&format!("{k}: {s}\n"));
                }
                Ok(out)
            }
            FormatArg::Json => {
                let map: serde_json::Map<String, Value> = self.fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
                let mut s = serde_json::to_string_pretty(&Value::Object(map)).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            FormatArg::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
                w.write_record(self.fields.iter().map(|f| f.0)).map_err(io)?;
                w.write_record(self.fields.iter().map(|f| match &f.1 {
                    Value::Array(a) => a.iter().map(plain).collect::<Vec<_>>().join(";"),
                    v => plain(v),
                }))
                .map_err(io)?;
                let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
            }
        }
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
